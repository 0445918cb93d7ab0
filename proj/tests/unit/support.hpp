#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "dialbench/transcript.hpp"

namespace test {

inline std::string data_path(const std::string& name) { return std::string(DIALBENCH_TEST_DATA_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline dialbench::Session load_one(const std::string& name) {
  return dialbench::normalize_session(dialbench::load_corpus(data_path(name), dialbench::CorpusLabel::Other).sessions.at(0));
}

inline dialbench::Turn T(std::string text) { return {dialbench::Speaker::Therapist, std::move(text), {}, {}}; }
inline dialbench::Turn C(std::string text) { return {dialbench::Speaker::Client, std::move(text), {}, {}}; }

inline dialbench::Session make_session(std::vector<dialbench::Turn> turns, std::string id = "s") {
  dialbench::Session s;
  s.session_id = std::move(id);
  s.raw_turn_count = turns.size();
  s.turns = std::move(turns);
  return s;
}

}  // namespace test
