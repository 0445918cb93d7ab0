#include <cmath>
#include <set>
#include <sstream>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/pe_metrics.hpp"
#include "dialbench/simulator.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dialbench;

namespace {

std::string serialize(const Corpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

}  // namespace

TEST_CASE("same params give byte-identical corpora") {
  SimParams p;
  p.seed = 99;
  p.avoidance_rate = 0.2;
  p.redirection_probability = 0.5;
  p.suds_trajectory = {{0.0, 80}, {1.0, 40}};
  CHECK(serialize(generate_corpus(p)) == serialize(generate_corpus(p)));
  SimParams q = p;
  q.seed = 100;
  CHECK(serialize(generate_corpus(p)) != serialize(generate_corpus(q)));
}

TEST_CASE("sessions are normalized, alternating and labeled") {
  SimParams p;
  p.session_count = 25;
  const Corpus c = generate_corpus(p);
  REQUIRE(c.sessions.size() == 25);
  CHECK(c.label == CorpusLabel::Synthetic);
  CHECK(c.sessions[0].session_id == "sim-0000");
  CHECK(c.sessions[24].session_id == "sim-0024");
  for (const Session& s : c.sessions) {
    CHECK(alternates_strictly(s));
    CHECK(s.turns.front().speaker == Speaker::Therapist);
    CHECK(normalize_session(s) == s);
    CHECK(s.raw_turn_count == s.turns.size());
    CHECK(s.turns.size() >= 4);
  }
}

TEST_CASE("utterance lengths follow the requested distribution") {
  SimParams p;
  p.session_count = 100;
  p.therapist_utterance_length = {30.0, 3.0};
  p.client_utterance_length = {60.0, 10.0};
  const Corpus c = generate_corpus(p);
  double t_sum = 0, c_sum = 0;
  std::size_t t_n = 0, c_n = 0;
  for (const Session& s : c.sessions) {
    for (const Turn& t : s.turns) {
      const double w = static_cast<double>(word_count(t.text));
      if (t.speaker == Speaker::Therapist) {
        t_sum += w;
        ++t_n;
      } else {
        c_sum += w;
        ++c_n;
      }
    }
  }
  CHECK(t_sum / static_cast<double>(t_n) == doctest::Approx(30.0).epsilon(0.05));
  CHECK(c_sum / static_cast<double>(c_n) == doctest::Approx(60.0).epsilon(0.05));
}

TEST_CASE("SUDS trajectory is recoverable") {
  SimParams p;
  p.session_count = 30;
  p.suds_trajectory = {{0.0, 85}, {0.5, 60}, {1.0, 35}};
  const Corpus c = generate_corpus(p);
  for (const Session& s : c.sessions) {
    const auto events = extract_suds(s);
    REQUIRE(events.size() == 3);
    CHECK(events[0].value == 85);
    CHECK(events[2].value == 35);
    CHECK(*suds_progression(events) == -50);
  }
  CHECK(extract_suds(test::make_session({test::C(suds_statement(42))})).at(0).value == 42);
}

TEST_CASE("avoidance injection and redirection") {
  SimParams p;
  p.session_count = 50;
  p.avoidance_rate = 0.3;
  p.redirection_probability = 1.0;
  const Corpus c = generate_corpus(p);
  std::size_t events = 0;
  for (const Session& s : c.sessions) {
    const AvoidanceMetrics m = avoidance_metrics(s, PatternRuleSet::bundled());
    events += m.events;
    if (m.handling) CHECK(*m.handling == 1.0);
  }
  CHECK(events > 100);

  p.redirection_probability = 0.0;
  for (const Session& s : generate_corpus(p).sessions) {
    const AvoidanceMetrics m = avoidance_metrics(s, PatternRuleSet::bundled());
    if (m.handling) CHECK(*m.handling == 0.0);
  }
}

TEST_CASE("emotion decay produces habituation") {
  SimParams p;
  p.session_count = 40;
  p.turns_per_session = {30, 2};
  p.emotion_rate = 0.3;
  p.emotion_decay = 0.2;
  std::size_t positive = 0;
  for (const Session& s : generate_corpus(p).sessions) {
    const auto h = emotional_habituation(emotion_intensity_series(s, EmotionLexicon::bundled()));
    if (h && *h > 0.0) ++positive;
  }
  CHECK(positive >= 38);
}

TEST_CASE("vocabulary avoids lexicon and stopwords") {
  const auto vocab = simulator_vocabulary(500, 1);
  CHECK(vocab.size() == 500);
  std::set<std::string> unique(vocab.begin(), vocab.end());
  CHECK(unique.size() == 500);
  for (const auto& w : vocab) {
    CHECK(EmotionLexicon::bundled().weight(w) == 0.0);
    CHECK_FALSE(bundled_stopwords().contains(w));
  }
}

TEST_CASE("params JSON round trip and validation") {
  SimParams p;
  p.session_count = 7;
  p.suds_trajectory = {{0.0, 70}, {1.0, 30}};
  p.avoidance_rate = 0.1;
  p.label = CorpusLabel::Real;
  const SimParams back = SimParams::from_json(p.to_json());
  CHECK(back.to_json() == p.to_json());

  const SimParams flat = SimParams::from_json(
      {{"utterance_length", {{"mean", 68.7}, {"sd", 26.6}}}, {"suds_trajectory", {{{"fraction", 0.0}, {"value", 50}}}}});
  CHECK(flat.therapist_utterance_length.mean == 68.7);
  CHECK(flat.client_utterance_length.sd == 26.6);
  CHECK(flat.suds_trajectory.at(0).value == 50);

  CHECK_THROWS_AS(SimParams::from_json({{"avoidance_rate", 1.5}}), InputError);
  CHECK_THROWS_AS(SimParams::from_json({{"session_count", 0}}), InputError);
  CHECK_THROWS_AS(SimParams::from_json({{"suds_trajectory", {{0.5, 101}}}}), InputError);
  CHECK_THROWS_AS(SimParams::from_json({{"suds_trajectory", {{0.9, 10}, {0.1, 10}}}}), InputError);
  CHECK_THROWS_AS(SimParams::from_json({{"label", "robot"}}), InputError);
  CHECK_THROWS_AS(SimParams::from_json(nlohmann::json::array()), InputError);

  for (const char* name : {"sim_real_like.json", "sim_synthetic_like.json"}) {
    CHECK_NOTHROW(SimParams::load(std::string(DIALBENCH_DATA_DIR) + "/" + name));
  }
}
