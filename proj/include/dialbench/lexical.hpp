#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dialbench/transcript.hpp"

namespace dialbench {

struct TokenizedText {
  std::vector<std::string> tokens;  // lowercase words
  std::size_t sentence_count = 0;
};

// Words are maximal runs of letters, digits and apostrophes (ASCII and
// typographic), lowercased, with apostrophes trimmed from the ends. Sentences
// end at a run of . ! ? followed by whitespace or end of text; non-blank text
// always has at least one sentence.
TokenizedText tokenize(std::string_view text);

// Words only; skips sentence bookkeeping.
std::vector<std::string> words(std::string_view text);
std::size_t word_count(std::string_view text);

// Vowel-group heuristic with silent-e handling. Always >= 1.
int syllable_count(std::string_view word);

// Raw counts behind the Flesch score, so session totals can be accumulated
// per turn.
struct ReadabilityCounts {
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t syllables = 0;
};

ReadabilityCounts readability_counts(std::string_view text);

// Flesch Reading Ease, unclamped. Throws DomainError when there are no words.
double flesch_reading_ease(const ReadabilityCounts& counts);
double readability(std::string_view text);
// Totals over turns: each turn contributes at least one sentence.
double readability(const Session& session);

// Type-token ratio over every turn of the session.
double vocabulary_richness(const Session& session);
double type_token_ratio(const std::vector<std::string>& tokens);

}  // namespace dialbench
