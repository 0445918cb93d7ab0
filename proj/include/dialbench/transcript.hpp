#pragma once

// Transcript ingestion: JSONL parsing, validation, and normalization into the
// canonical alternating-turn Session form every metric consumes.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dialbench {

enum class Speaker { Therapist, Client };
enum class CorpusLabel { Real, Synthetic, Other };

std::string_view to_string(Speaker speaker);
std::string_view to_string(CorpusLabel label);

// Accepts "T"/"therapist"/"counselor" and "C"/"client"/"patient", any case.
std::optional<Speaker> parse_speaker(std::string_view text);
std::optional<CorpusLabel> parse_corpus_label(std::string_view text);

struct Turn {
  Speaker speaker = Speaker::Therapist;
  std::string text;
  std::optional<std::int64_t> start_ms;
  std::optional<std::int64_t> end_ms;

  bool has_timing() const { return start_ms.has_value() && end_ms.has_value(); }
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Session {
  std::string session_id;
  std::vector<Turn> turns;
  // Turn count before same-speaker merging. Never smaller than turns.size().
  std::size_t raw_turn_count = 0;
  CorpusLabel corpus_label = CorpusLabel::Other;
  std::map<std::string, std::string> meta;

  std::size_t count_turns(Speaker speaker) const;
  friend bool operator==(const Session&, const Session&) = default;
};

struct Corpus {
  CorpusLabel label = CorpusLabel::Other;
  std::vector<Session> sessions;
};

// Bracketed or parenthesized spans whose content names one of these words are
// treated as non-verbal cues and removed.
struct CueLexicon {
  std::vector<std::string> words = {"pause",  "pauses", "laughs",  "laughter", "laughing",
                                    "sighs",  "sigh",   "crying",  "cries",    "sobs",
                                    "sobbing", "silence", "inaudible"};
};

// One transcript JSONL record -> Session. Throws InputError with `line` in
// the message on any schema violation.
Session session_from_json(const nlohmann::json& record, std::size_t line);
nlohmann::json session_to_json(const Session& session);

// Reads one JSON object per line (blank lines ignored). Sessions are
// validated but not normalized; input order is preserved.
Corpus parse_corpus(std::istream& in, CorpusLabel label);
Corpus load_corpus(const std::string& path, CorpusLabel label);

void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

// Removes cue spans and collapses whitespace in one utterance.
std::string strip_nonverbal_cues(std::string_view text, const CueLexicon& cues = {});

// Cue removal, empty-turn dropping, same-speaker merging (single-space
// joiner), whitespace collapse. Idempotent.
Session normalize_session(const Session& session, const CueLexicon& cues = {});
Corpus normalize_corpus(const Corpus& corpus, const CueLexicon& cues = {});

bool alternates_strictly(const Session& session);

}  // namespace dialbench
