#include "dialbench/transcript.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "dialbench/error.hpp"

namespace dialbench {
namespace {

using nlohmann::json;

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw InputError(what + " at line " + std::to_string(line));
}

std::optional<std::int64_t> read_timestamp(const json& turn, const char* key, std::size_t line) {
  const auto it = turn.find(key);
  if (it == turn.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) fail(line, std::string("non-integer ") + key);
  const auto value = it->get<std::int64_t>();
  if (value < 0) fail(line, std::string("negative ") + key);
  return value;
}

const json& require(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(line, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::Therapist ? "therapist" : "client";
}

std::string_view to_string(CorpusLabel label) {
  switch (label) {
    case CorpusLabel::Real:
      return "real";
    case CorpusLabel::Synthetic:
      return "synthetic";
    case CorpusLabel::Other:
      break;
  }
  return "other";
}

std::optional<Speaker> parse_speaker(std::string_view text) {
  std::string key = lowercase(text);
  key = collapse_whitespace(key);
  if (key == "t" || key == "therapist" || key == "counselor") return Speaker::Therapist;
  if (key == "c" || key == "client" || key == "patient") return Speaker::Client;
  return std::nullopt;
}

std::optional<CorpusLabel> parse_corpus_label(std::string_view text) {
  const std::string key = lowercase(text);
  if (key == "real") return CorpusLabel::Real;
  if (key == "synthetic") return CorpusLabel::Synthetic;
  if (key == "other") return CorpusLabel::Other;
  return std::nullopt;
}

std::size_t Session::count_turns(Speaker speaker) const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [&](const Turn& t) { return t.speaker == speaker; }));
}

Session session_from_json(const json& record, std::size_t line) {
  if (!record.is_object()) fail(line, "record is not a JSON object");

  Session session;
  const json& id = require(record, "session_id", line);
  if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
    fail(line, "session_id must be a non-empty string");
  }
  session.session_id = id.get<std::string>();

  const json& label = require(record, "corpus_label", line);
  const auto parsed_label =
      label.is_string() ? parse_corpus_label(label.get<std::string>()) : std::nullopt;
  if (!parsed_label) fail(line, "unknown corpus_label");
  session.corpus_label = *parsed_label;

  const json& turns = require(record, "turns", line);
  if (!turns.is_array()) fail(line, "turns must be an array");
  if (turns.empty()) fail(line, "empty turns list");
  for (const json& t : turns) {
    if (!t.is_object()) fail(line, "turn is not an object");
    Turn turn;
    const json& speaker = require(t, "speaker", line);
    const auto parsed =
        speaker.is_string() ? parse_speaker(speaker.get<std::string>()) : std::nullopt;
    if (!parsed) fail(line, "unknown speaker");
    turn.speaker = *parsed;
    const json& text = require(t, "text", line);
    if (!text.is_string()) fail(line, "turn text must be a string");
    turn.text = text.get<std::string>();
    turn.start_ms = read_timestamp(t, "start_ms", line);
    turn.end_ms = read_timestamp(t, "end_ms", line);
    if (turn.has_timing() && *turn.end_ms < *turn.start_ms) fail(line, "end_ms before start_ms");
    session.turns.push_back(std::move(turn));
  }
  session.raw_turn_count = session.turns.size();

  if (const auto meta = record.find("meta"); meta != record.end() && !meta->is_null()) {
    if (!meta->is_object()) fail(line, "meta must be an object");
    for (const auto& [key, value] : meta->items()) {
      if (!value.is_string()) fail(line, "meta value for '" + key + "' must be a string");
      session.meta.emplace(key, value.get<std::string>());
    }
  }
  return session;
}

json session_to_json(const Session& session) {
  json turns = json::array();
  for (const Turn& turn : session.turns) {
    json t = {{"speaker", to_string(turn.speaker)}, {"text", turn.text}};
    if (turn.start_ms) t["start_ms"] = *turn.start_ms;
    if (turn.end_ms) t["end_ms"] = *turn.end_ms;
    turns.push_back(std::move(t));
  }
  json out = {{"session_id", session.session_id},
              {"corpus_label", to_string(session.corpus_label)},
              {"turns", std::move(turns)}};
  if (!session.meta.empty()) out["meta"] = session.meta;
  return out;
}

Corpus parse_corpus(std::istream& in, CorpusLabel label) {
  Corpus corpus;
  corpus.label = label;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      continue;
    }
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(line, std::string("malformed JSON (") + e.what() + ")");
    }
    Session session = session_from_json(record, line);
    if (!seen.insert(session.session_id).second) {
      fail(line, "duplicate session_id '" + session.session_id + "'");
    }
    corpus.sessions.push_back(std::move(session));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, CorpusLabel label) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file '" + path + "'");
  try {
    return parse_corpus(in, label);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const Session& session : corpus.sessions) {
    out << session_to_json(session).dump() << '\n';
  }
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

std::string strip_nonverbal_cues(std::string_view text, const CueLexicon& cues) {
  static const std::regex kSpan(R"(\[([^\[\]]*)\]|\(([^()]*)\))");
  static const std::regex kWord("[a-z]+");
  const std::unordered_set<std::string> lexicon(cues.words.begin(), cues.words.end());

  auto is_cue = [&](const std::string& content) {
    const std::string lower = lowercase(content);
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), kWord);
         it != std::sregex_iterator(); ++it) {
      if (lexicon.contains(it->str())) return true;
    }
    return false;
  };

  // Repeat until stable so that removing an inner cue cannot expose a new one
  // on a later pass.
  std::string current(text);
  for (;;) {
    std::string next;
    std::size_t last = 0;
    bool removed = false;
    for (auto it = std::sregex_iterator(current.begin(), current.end(), kSpan);
         it != std::sregex_iterator(); ++it) {
      const std::smatch& m = *it;
      const std::string content = m[1].matched ? m[1].str() : m[2].str();
      if (!is_cue(content)) continue;
      next.append(current, last, static_cast<std::size_t>(m.position(0)) - last);
      next.push_back(' ');
      last = static_cast<std::size_t>(m.position(0) + m.length(0));
      removed = true;
    }
    if (!removed) break;
    next.append(current, last, std::string::npos);
    current = std::move(next);
  }
  return collapse_whitespace(current);
}

Session normalize_session(const Session& session, const CueLexicon& cues) {
  Session out;
  out.session_id = session.session_id;
  out.corpus_label = session.corpus_label;
  out.meta = session.meta;

  std::size_t dropped = 0;
  for (const Turn& turn : session.turns) {
    std::string text = strip_nonverbal_cues(turn.text, cues);
    if (text.empty()) {
      ++dropped;
      continue;
    }
    if (!out.turns.empty() && out.turns.back().speaker == turn.speaker) {
      Turn& prev = out.turns.back();
      prev.text += ' ';
      prev.text += text;
      if (prev.has_timing() && turn.has_timing()) {
        *prev.end_ms += *turn.end_ms - *turn.start_ms;
      } else {
        prev.start_ms.reset();
        prev.end_ms.reset();
      }
      continue;
    }
    Turn copy = turn;
    copy.text = std::move(text);
    if (!copy.has_timing()) {
      copy.start_ms.reset();
      copy.end_ms.reset();
    }
    out.turns.push_back(std::move(copy));
  }
  if (out.turns.empty()) {
    throw InputError("empty session after normalization: '" + session.session_id + "'");
  }
  const std::size_t raw = std::max(session.raw_turn_count, session.turns.size());
  out.raw_turn_count = std::max(raw - dropped, out.turns.size());
  return out;
}

Corpus normalize_corpus(const Corpus& corpus, const CueLexicon& cues) {
  Corpus out;
  out.label = corpus.label;
  out.sessions.reserve(corpus.sessions.size());
  for (const Session& s : corpus.sessions) out.sessions.push_back(normalize_session(s, cues));
  return out;
}

bool alternates_strictly(const Session& session) {
  for (std::size_t i = 1; i < session.turns.size(); ++i) {
    if (session.turns[i].speaker == session.turns[i - 1].speaker) return false;
  }
  return true;
}

}  // namespace dialbench
