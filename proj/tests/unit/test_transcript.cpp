#include <sstream>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/rng.hpp"
#include "dialbench/transcript.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dialbench;
using test::C;
using test::T;

namespace {

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusLabel::Other);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

// Random session with cue spans, blank turns and same-speaker runs.
Session random_session(Rng& rng, std::size_t index) {
  static const char* kWords[] = {"i", "was", "there", "the", "car", "dark", "scared", "okay", "yes", "and"};
  static const char* kCues[] = {"[pause]", "(laughs)", "[crying]", "(sighs)", "[inaudible]", "(door)"};
  Session s;
  s.session_id = "r" + std::to_string(index);
  const std::size_t n = 1 + rng.below(12);
  for (std::size_t i = 0; i < n; ++i) {
    Turn t;
    t.speaker = rng.bernoulli(0.5) ? Speaker::Therapist : Speaker::Client;
    const std::size_t w = rng.below(6);
    for (std::size_t k = 0; k < w; ++k) {
      if (!t.text.empty()) t.text += rng.bernoulli(0.2) ? "   " : " ";
      t.text += rng.bernoulli(0.15) ? kCues[rng.below(6)] : kWords[rng.below(10)];
    }
    if (rng.bernoulli(0.3)) {
      t.start_ms = static_cast<std::int64_t>(rng.below(1000));
      t.end_ms = *t.start_ms + static_cast<std::int64_t>(rng.below(5000));
    }
    s.turns.push_back(std::move(t));
  }
  s.turns.push_back(C("anchor words here"));
  s.raw_turn_count = s.turns.size();
  return s;
}

}  // namespace

TEST_CASE("minimal valid record") {
  const Corpus c = parse(R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"Hi"},{"speaker":"C","text":"Hello"}]})");
  REQUIRE(c.sessions.size() == 1);
  CHECK(c.sessions[0].raw_turn_count == 2);
  CHECK(c.sessions[0].corpus_label == CorpusLabel::Real);
  CHECK(c.sessions[0].turns[0].speaker == Speaker::Therapist);
}

TEST_CASE("schema violations report the line") {
  CHECK(error_of(R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"nurse","text":"Hi"}]})") ==
        "unknown speaker at line 1");
  CHECK(error_of("\n" R"({"session_id":"a","corpus_label":"real","turns":[]})") == "empty turns list at line 2");
  const std::string ok = R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"x"}]})";
  CHECK(error_of(ok + "\n" + ok) == "duplicate session_id 'a' at line 2");
  CHECK(error_of(ok + "\n{not json").find("malformed JSON") == 0);
  CHECK(error_of(ok + "\n{not json").find("at line 2") != std::string::npos);
  CHECK(error_of(R"({"corpus_label":"real","turns":[{"speaker":"T","text":"x"}]})").find("session_id") !=
        std::string::npos);
  CHECK(error_of(R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"x","start_ms":5,"end_ms":2}]})") ==
        "end_ms before start_ms at line 1");
  CHECK(error_of(R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"x","start_ms":-5}]})")
            .find("at line 1") != std::string::npos);
  CHECK(error_of(R"({"session_id":"a","corpus_label":"fake","turns":[{"speaker":"T","text":"x"}]})") ==
        "unknown corpus_label at line 1");
}

TEST_CASE("speaker aliases are case-insensitive") {
  for (const char* s : {"T", "t", "Therapist", "COUNSELOR"}) CHECK(parse_speaker(s) == Speaker::Therapist);
  for (const char* s : {"C", "client", "Patient"}) CHECK(parse_speaker(s) == Speaker::Client);
  CHECK_FALSE(parse_speaker("nurse").has_value());
}

TEST_CASE("write then parse reproduces a 200-session corpus in order") {
  Rng rng(11);
  Corpus original;
  original.label = CorpusLabel::Other;
  for (std::size_t i = 0; i < 200; ++i) {
    Session s = random_session(rng, i);
    s.meta["k"] = "v" + std::to_string(i % 7);
    original.sessions.push_back(s);
  }
  std::ostringstream out;
  write_corpus(out, original);
  const Corpus back = parse(out.str());
  REQUIRE(back.sessions.size() == 200);
  for (std::size_t i = 0; i < 200; ++i) CHECK(back.sessions[i] == original.sessions[i]);
}

TEST_CASE("merge consecutive same-speaker turns") {
  const Session s = normalize_session(test::make_session({T("Hi"), T("How are you?"), C("Fine")}));
  REQUIRE(s.turns.size() == 2);
  CHECK(s.turns[0].text == "Hi How are you?");
  CHECK(s.turns[1].text == "Fine");
  CHECK(s.raw_turn_count == 3);
}

TEST_CASE("non-verbal cues are removed, other brackets kept") {
  CHECK(strip_nonverbal_cues("I was... [pause] scared (sobs)") == "I was... scared");
  CHECK(strip_nonverbal_cues("(Laughs) okay") == "okay");
  CHECK(strip_nonverbal_cues("the [red] car (I think)") == "the [red] car (I think)");
  CHECK(strip_nonverbal_cues("[long pause]") == "");
}

TEST_CASE("alternating session is unchanged") {
  std::vector<Turn> turns;
  for (int i = 0; i < 10; ++i) turns.push_back(i % 2 ? C("reply " + std::to_string(i)) : T("ask " + std::to_string(i)));
  const Session in = test::make_session(turns);
  const Session out = normalize_session(in);
  CHECK(out.turns == in.turns);
  CHECK(out.raw_turn_count == 10);
}

TEST_CASE("cue-only turns are dropped before merging") {
  const Session s = normalize_session(test::make_session({T("one"), C("[pause]"), T("two"), C("three")}));
  REQUIRE(s.turns.size() == 2);
  CHECK(s.turns[0].text == "one two");
  CHECK(s.raw_turn_count == 3);
}

TEST_CASE("empty session after normalization") {
  CHECK_THROWS_WITH_AS(normalize_session(test::make_session({T("[pause]"), C("(laughs)")}, "x")),
                       "empty session after normalization: 'x'", InputError);
}

TEST_CASE("merged timestamps add the spans") {
  Session s = test::make_session({T("a"), T("b"), C("c")});
  s.turns[0].start_ms = 0;
  s.turns[0].end_ms = 1000;
  s.turns[1].start_ms = 5000;
  s.turns[1].end_ms = 7000;
  const Session n = normalize_session(s);
  REQUIRE(n.turns[0].has_timing());
  CHECK(*n.turns[0].start_ms == 0);
  CHECK(*n.turns[0].end_ms == 3000);
}

TEST_CASE("normalization properties over random sessions") {
  Rng rng(5);
  for (std::size_t i = 0; i < 500; ++i) {
    const Session s = random_session(rng, i);
    const Session once = normalize_session(s);
    CHECK(normalize_session(once) == once);
    CHECK(alternates_strictly(once));
    CHECK(once.raw_turn_count >= once.turns.size());
    std::size_t before = 0;
    for (const Turn& t : s.turns) before += word_count(strip_nonverbal_cues(t.text));
    std::size_t after = 0;
    for (const Turn& t : once.turns) {
      CHECK_FALSE(t.text.empty());
      after += word_count(t.text);
    }
    CHECK(before == after);
  }
}

TEST_CASE("fixture corpus normalizes to alternating sessions") {
  const Corpus c = normalize_corpus(load_corpus(test::data_path("sample_corpus.jsonl"), CorpusLabel::Real));
  REQUIRE(c.sessions.size() == 5);
  for (const Session& s : c.sessions) CHECK(alternates_strictly(s));
  CHECK(c.sessions[0].turns[0].text ==
        "Today we'll start the imaginal exposure. I'd like you to close your eyes. Describe it in the present "
        "tense, as if it's happening right now.");
  CHECK(c.sessions[0].raw_turn_count == 13);
  CHECK(c.sessions[1].turns[1].text == "Yeah. I still think about it every day. Not in a good way though.");
}
