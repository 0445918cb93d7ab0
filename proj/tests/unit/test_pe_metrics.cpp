#include <cmath>
#include <sstream>

#include "dialbench/embedder.hpp"
#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/pe_metrics.hpp"
#include "dialbench/rng.hpp"
#include "dialbench/simulator.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dialbench;
using test::C;
using test::T;

namespace {

std::vector<SudsEvent> client_events(std::initializer_list<double> values) {
  std::vector<SudsEvent> out;
  std::size_t i = 0;
  for (double v : values) out.push_back({i++, v, Speaker::Client});
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

}  // namespace

TEST_CASE("SUDS examples") {
  const auto one = extract_suds(test::make_session({T("How are you?"), C("My SUDS is about 75 right now.")}));
  REQUIRE(one.size() == 1);
  CHECK(one[0] == SudsEvent{1, 75, Speaker::Client});
  const auto two = extract_suds(test::make_session({C("I'd say 90 out of 100.")}));
  REQUIRE(two.size() == 1);
  CHECK(two[0].value == 90);
  CHECK(extract_suds(test::make_session({C("I felt 100 percent done")})).empty());
}

TEST_CASE("SUDS extraction matches the hand-labeled utterance file") {
  const auto lines = split(test::read_text(test::data_path("suds_utterances.tsv")), '\n');
  std::size_t checked = 0;
  for (const std::string& line : lines) {
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, '\t');
    REQUIRE(cols.size() == 3);
    const Speaker speaker = *parse_speaker(cols[0]);
    const auto events = extract_suds(test::make_session({Turn{speaker, cols[1], {}, {}}}));
    std::vector<double> expected;
    if (cols[2] != "-") {
      for (const auto& v : split(cols[2], ',')) expected.push_back(std::stod(v));
    }
    std::vector<double> got;
    for (const auto& e : events) {
      got.push_back(e.value);
      CHECK(e.speaker == speaker);
      CHECK(e.turn_index == 0);
    }
    INFO(cols[1]);
    CHECK(got == expected);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("SUDS progression") {
  CHECK(*suds_progression(client_events({80, 60, 40})) == -40);
  CHECK_FALSE(suds_progression(client_events({50})).has_value());
  CHECK(*suds_progression(client_events({30, 70})) == 40);
  // Therapist-reported values are ignored.
  auto mixed = client_events({30, 70});
  mixed.push_back({5, 10, Speaker::Therapist});
  CHECK(*suds_progression(mixed) == 40);
}

TEST_CASE("SUDS progression stays in range on random sessions") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    std::vector<Turn> turns;
    for (int k = 0; k < 8; ++k) {
      turns.push_back(T("Rate it."));
      turns.push_back(C("My SUDS is " + std::to_string(rng.below(101)) + " now."));
    }
    const auto p = suds_progression(extract_suds(test::make_session(turns)));
    REQUIRE(p.has_value());
    CHECK(*p >= -100);
    CHECK(*p <= 100);
  }
}

TEST_CASE("emotion intensity") {
  const EmotionLexicon lex({{"scared", 0.8}});
  const auto series = emotion_intensity_series(test::make_session({T("scared scared"), C("I was scared scared"), C("nothing here")}), lex);
  REQUIRE(series.size() == 2);
  CHECK(series[0] == doctest::Approx(0.4));
  CHECK(series[1] == 0.0);
  CHECK_THROWS_AS(emotion_intensity_series(test::make_session({C("x")}), EmotionLexicon()), InputError);

  // Three client turns: 0.8/2, 0, 0.8/4.
  const Session s = test::make_session({T("hi"), C("so scared"), T("and"), C("fine"), T("ok"), C("scared of the dark")});
  PeResources res;
  res.lexicon = &lex;
  const auto v = compute_pe_metric_vector(s, HashedBagOfWords(), res);
  CHECK(*v.emotion_intensity == doctest::Approx((0.4 + 0.0 + 0.2) / 3.0));
}

TEST_CASE("habituation") {
  CHECK(*emotional_habituation({0.8, 0.5, 0.2}) == doctest::Approx(0.6));
  CHECK(*emotional_habituation({0.3, 0.3, 0.3, 0.3}) == 0.0);
  CHECK(*emotional_habituation({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) < 0.0);
  CHECK_FALSE(emotional_habituation({0.1, 0.2}).has_value());
}

TEST_CASE("reversing a strictly monotone series negates habituation") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> series(3 + rng.below(20));
    double x = 0.0;
    for (auto& v : series) v = (x += 0.01 + rng.uniform());
    std::vector<double> reversed(series.rbegin(), series.rend());
    CHECK(*emotional_habituation(reversed) == doctest::Approx(-*emotional_habituation(series)).epsilon(1e-12));
  }
}

TEST_CASE("thirds and halves") {
  CHECK(thirds(7).first.begin == 0);
  CHECK(thirds(7).first.end == 2);
  CHECK(thirds(7).second.begin == 5);
  CHECK(thirds(7).second.end == 7);
  CHECK(halves(5).first.end == 2);
  CHECK(halves(5).second.begin == 3);
}

TEST_CASE("avoidance handling ratio") {
  const auto& rules = PatternRuleSet::bundled();
  const Session two_events = test::make_session({T("Let's start."), C("I don't want to talk about it."),
                                                 T("Let's go back to the memory."), C("Can we skip this?"),
                                                 T("How is work?"), C("Fine.")});
  const AvoidanceMetrics m = avoidance_metrics(two_events, rules);
  CHECK(m.events == 2);
  CHECK(*m.handling == 0.5);

  const AvoidanceMetrics none = avoidance_metrics(test::make_session({T("Hello."), C("Hi."), T("Go on."), C("Okay.")}), rules);
  CHECK_FALSE(none.handling.has_value());
  CHECK(none.reduction == 0.0);
}

TEST_CASE("avoidance fixture hand values") {
  const AvoidanceMetrics m = avoidance_metrics(test::load_one("avoidance_session.jsonl"), PatternRuleSet::bundled());
  CHECK(m.events == 3);
  CHECK(m.handled == 2);
  CHECK(*m.handling == doctest::Approx(2.0 / 3.0));
  // Client avoidance flags 1 1 0 | 0 1 0.
  CHECK(m.reduction == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("marker densities") {
  const auto& rules = PatternRuleSet::bundled();
  const auto& lex = EmotionLexicon::bundled();
  const Session guided = test::make_session(
      {T("Close your eyes."), C("Okay."), T("Now close your eyes again."), C("Right."), T("Please close your eyes.")});
  const MarkerDensities g = marker_density_metrics(guided, rules, lex);
  CHECK(*g.exposure_guidance == 1.0);
  CHECK(*g.cognitive_restructuring == 0.0);

  const EmotionLexicon custom({{"terrified", 0.9}});
  const MarkerDensities d = marker_density_metrics(test::load_one("density_session.jsonl"), rules, custom);
  CHECK(*d.exposure_guidance == doctest::Approx(0.6));
  CHECK(*d.cognitive_restructuring == doctest::Approx(0.4));
  CHECK(*d.emotional_engagement == doctest::Approx(0.4));
}

TEST_CASE("narrative components forced by identical connective-free turns") {
  const Session s = test::make_session({T("Go on."), C("The red door was open."), T("And?"), C("The red door was open.")});
  const NarrativeMetrics n = narrative_metrics(s, HashedBagOfWords(), bundled_stopwords());
  CHECK(n.trauma_narrative_coherence == doctest::Approx(0.5));
  CHECK(n.narrative_development <= 0.0);
  CHECK_THROWS_AS(narrative_metrics(test::make_session({T("x"), C("y")}), HashedBagOfWords(), bundled_stopwords()),
                  DomainError);
}

TEST_CASE("narrative fixture hand values") {
  const Session s = test::load_one("narrative_session.jsonl");
  const HashedBagOfWords e;
  // The cosine oracle below assumes distinct client words land in distinct buckets.
  std::map<std::size_t, std::string> owner;
  for (const Turn& t : s.turns) {
    if (t.speaker != Speaker::Client) continue;
    for (const auto& w : words(t.text)) {
      const auto [it, inserted] = owner.emplace(e.bucket(w), w);
      REQUIRE(it->second == w);
    }
  }
  const NarrativeMetrics n = narrative_metrics(s, e, bundled_stopwords());
  // New content words per client turn: 4, 2, 3.
  CHECK(n.narrative_development == doctest::Approx(-1.0));
  // Cosines 0 and 1/7; connectives 3 of 20 client tokens.
  CHECK(n.trauma_narrative_coherence == doctest::Approx(0.5 * (1.0 / 14.0) + 0.5 * 0.15).epsilon(1e-12));
}

TEST_CASE("density metrics stay in the unit interval") {
  SimParams p;
  p.session_count = 40;
  p.avoidance_rate = 0.3;
  p.redirection_probability = 0.5;
  p.guidance_rate = 0.4;
  p.restructuring_rate = 0.2;
  const Corpus corpus = generate_corpus(p);
  const HashedBagOfWords e;
  for (const Session& s : corpus.sessions) {
    const PEMetricVector v = compute_pe_metric_vector(s, e);
    for (const auto* m : {&v.emotional_engagement, &v.exposure_guidance, &v.cognitive_restructuring, &v.avoidance_handling}) {
      if (!m->has_value()) continue;
      CHECK(**m >= 0.0);
      CHECK(**m <= 1.0);
    }
    CHECK(*v.avoidance_reduction >= -1.0);
    CHECK(*v.avoidance_reduction <= 1.0);
  }
}

TEST_CASE("lexicon and rule file parsing") {
  const EmotionLexicon lex = EmotionLexicon::parse_tsv("# name: test\n# version: 2\nScared\t0.5\n\nsad\t1\n");
  CHECK(lex.name() == "test");
  CHECK(lex.version() == "2");
  CHECK(lex.weight("scared") == 0.5);
  CHECK(lex.size() == 2);
  CHECK_THROWS_AS(EmotionLexicon::parse_tsv("bad\t1.5\n"), InputError);
  CHECK_THROWS_AS(EmotionLexicon::parse_tsv("noweight\n"), InputError);
  CHECK(EmotionLexicon::bundled().size() >= 250);

  CHECK_THROWS_AS(PatternRuleSet::parse_json(R"({"avoidance_markers": ["x"]})"), InputError);
  CHECK_THROWS_AS(PatternRuleSet::parse_json("{"), InputError);
  std::string all = R"({"avoidance_markers":["("],"redirection_markers":["a"],"guidance_markers":["a"],)"
                    R"("restructuring_markers":["a"],"engagement_markers":["a"]})";
  CHECK_THROWS_AS(PatternRuleSet::parse_json(all), InputError);
  const PatternRuleSet shipped = PatternRuleSet::load(std::string(DIALBENCH_DATA_DIR) + "/pe_rules.json");
  CHECK(shipped.redirection_window() == 2);
  CHECK(shipped.matches("avoidance_markers", SimPhrases::kAvoidance));
  CHECK(shipped.matches("redirection_markers", SimPhrases::kRedirection));
  CHECK(shipped.matches("guidance_markers", SimPhrases::kGuidance));
  CHECK(shipped.matches("restructuring_markers", SimPhrases::kRestructuring));
}

TEST_CASE("PE field registry") {
  CHECK(PEMetricVector::fields().size() == 10);
  PEMetricVector v;
  v.suds_progression = -20;
  CHECK(*v.get("suds_progression") == -20);
  CHECK_THROWS_AS(v.get("nope"), InputError);
}
