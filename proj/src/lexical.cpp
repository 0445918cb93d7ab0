#include "dialbench/lexical.hpp"

#include <unordered_set>

#include "dialbench/error.hpp"

namespace dialbench {
namespace {

enum class CharClass { Word, Apostrophe, Space, SentenceEnd, Other };

// Decodes one UTF-8 code point starting at text[i] and advances i. Invalid
// bytes decode as themselves so tokenization stays total.
char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  int extra = 0;
  char32_t cp = lead;
  if (lead >= 0xF0 && lead < 0xF8) {
    extra = 3;
    cp = lead & 0x07;
  } else if (lead >= 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if (lead >= 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  }
  if (extra == 0 || lead >= 0xF8 || i + extra >= text.size()) {
    ++i;
    return lead;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return lead;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

CharClass classify(char32_t cp) {
  if (cp < 0x80) {
    const char c = static_cast<char>(cp);
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
      return CharClass::Word;
    }
    if (c == '\'') return CharClass::Apostrophe;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      return CharClass::Space;
    }
    if (c == '.' || c == '!' || c == '?') return CharClass::SentenceEnd;
    return CharClass::Other;
  }
  if (cp == 0x2018 || cp == 0x2019) return CharClass::Apostrophe;
  if (cp == 0x2026) return CharClass::SentenceEnd;  // ellipsis
  if (cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x3000) return CharClass::Space;
  // General punctuation, Latin-1 punctuation and symbols.
  if ((cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x00A1 && cp <= 0x00BF) || cp == 0x00D7 ||
      cp == 0x00F7) {
    return CharClass::Other;
  }
  return CharClass::Word;
}

void append_lower(std::string& out, std::string_view bytes) {
  for (const char c : bytes) {
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
}

void flush_token(std::string& token, std::vector<std::string>& tokens) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && token[begin] == '\'') ++begin;
  while (end > begin && token[end - 1] == '\'') --end;
  if (end > begin) tokens.emplace_back(token.substr(begin, end - begin));
  token.clear();
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

}  // namespace

TokenizedText tokenize(std::string_view text) {
  TokenizedText out;
  std::string token;
  bool any_visible = false;
  bool segment_has_word = false;
  std::size_t segments_with_words = 0;
  bool after_terminal = false;  // inside a run of . ! ?

  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(text, i);
    const CharClass cls = classify(cp);
    if (cls != CharClass::Space) any_visible = true;

    if (cls == CharClass::Word) {
      append_lower(token, text.substr(start, i - start));
    } else if (cls == CharClass::Apostrophe) {
      token.push_back('\'');
    } else {
      flush_token(token, out.tokens);
    }
    if (cls == CharClass::Word) segment_has_word = true;

    if (cls == CharClass::SentenceEnd) {
      after_terminal = true;
      continue;
    }
    if (after_terminal && cls == CharClass::Space) {
      if (segment_has_word) ++segments_with_words;
      segment_has_word = false;
    }
    after_terminal = false;
  }
  flush_token(token, out.tokens);
  if (segment_has_word) ++segments_with_words;

  if (!any_visible) {
    out.sentence_count = 0;
  } else {
    out.sentence_count = std::max<std::size_t>(1, segments_with_words);
  }
  return out;
}

std::vector<std::string> words(std::string_view text) { return tokenize(text).tokens; }

std::size_t word_count(std::string_view text) { return tokenize(text).tokens.size(); }

int syllable_count(std::string_view word) {
  std::string letters;
  for (const char c : word) {
    if (c >= 'a' && c <= 'z') letters.push_back(c);
    if (c >= 'A' && c <= 'Z') letters.push_back(static_cast<char>(c - 'A' + 'a'));
  }
  const std::size_t n = letters.size();
  int groups = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_vowel(letters[i]) && (i == 0 || !is_vowel(letters[i - 1]))) ++groups;
  }

  // Silent final e: a lone "e" closing the word ("fire"), or before a final
  // s/d ("makes", "scared"), unless it is consonant+"le" ("table"), "-ted" /
  // "-ded" ("wanted"), or a sibilant "-es" ("horses").
  auto lone_e_at = [&](std::size_t pos) {
    return pos >= 1 && letters[pos] == 'e' && !is_vowel(letters[pos - 1]);
  };
  bool silent = false;
  if (n >= 2 && lone_e_at(n - 1)) {
    const bool consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
    silent = !consonant_le;
  } else if (n >= 3 && (letters[n - 1] == 'd' || letters[n - 1] == 's') && lone_e_at(n - 2)) {
    const char before = letters[n - 3];
    if (letters[n - 1] == 'd') {
      silent = before != 't' && before != 'd';
    } else {
      const bool sibilant = before == 's' || before == 'x' || before == 'z' || before == 'c' ||
                            before == 'g' || (before == 'h' && n >= 4 &&
                                              (letters[n - 4] == 's' || letters[n - 4] == 'c'));
      silent = !sibilant;
    }
  }
  if (silent) --groups;
  return std::max(groups, 1);
}

ReadabilityCounts readability_counts(std::string_view text) {
  const TokenizedText tok = tokenize(text);
  ReadabilityCounts counts;
  counts.words = tok.tokens.size();
  counts.sentences = tok.sentence_count;
  for (const auto& w : tok.tokens) counts.syllables += static_cast<std::size_t>(syllable_count(w));
  return counts;
}

double flesch_reading_ease(const ReadabilityCounts& counts) {
  if (counts.words == 0 || counts.sentences == 0) throw DomainError("undefined readability");
  const double words = static_cast<double>(counts.words);
  return 206.835 - 1.015 * (words / static_cast<double>(counts.sentences)) -
         84.6 * (static_cast<double>(counts.syllables) / words);
}

double readability(std::string_view text) { return flesch_reading_ease(readability_counts(text)); }

double readability(const Session& session) {
  ReadabilityCounts total;
  for (const Turn& turn : session.turns) {
    const ReadabilityCounts c = readability_counts(turn.text);
    total.words += c.words;
    total.sentences += c.sentences;
    total.syllables += c.syllables;
  }
  return flesch_reading_ease(total);
}

double type_token_ratio(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw DomainError("vocabulary richness of an empty session");
  const std::unordered_set<std::string> types(tokens.begin(), tokens.end());
  return static_cast<double>(types.size()) / static_cast<double>(tokens.size());
}

double vocabulary_richness(const Session& session) {
  std::vector<std::string> all;
  for (const Turn& turn : session.turns) {
    auto w = words(turn.text);
    all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return type_token_ratio(all);
}

}  // namespace dialbench
