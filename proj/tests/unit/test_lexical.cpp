#include <cmath>
#include <set>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/rng.hpp"
#include "dialbench/simulator.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dialbench;
using test::C;
using test::T;

TEST_CASE("tokenize words and sentences") {
  const TokenizedText t = tokenize("I was scared. Very scared!");
  CHECK(t.tokens == std::vector<std::string>{"i", "was", "scared", "very", "scared"});
  CHECK(t.sentence_count == 2);

  CHECK(tokenize("don't").tokens == std::vector<std::string>{"don't"});
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("").sentence_count == 0);
  CHECK(tokenize("   ").sentence_count == 0);
  CHECK(tokenize("no punctuation here").sentence_count == 1);
  CHECK(tokenize("Wait... what?! Okay").sentence_count == 3);
  CHECK(tokenize("3.5 is a number.").sentence_count == 1);
  CHECK(tokenize("'quoted' words").tokens == std::vector<std::string>{"quoted", "words"});
}

TEST_CASE("tokens never contain whitespace") {
  Rng rng(3);
  const std::string alphabet = "ab c.\t!?'\nD9 ";
  for (int i = 0; i < 300; ++i) {
    std::string text;
    const std::size_t n = rng.below(40);
    for (std::size_t k = 0; k < n; ++k) text += alphabet[rng.below(alphabet.size())];
    const TokenizedText t = tokenize(text);
    for (const auto& tok : t.tokens) {
      CHECK_FALSE(tok.empty());
      CHECK(tok.find_first_of(" \t\n") == std::string::npos);
    }
    const bool blank = text.find_first_not_of(" \t\n") == std::string::npos;
    if (!blank) CHECK(t.sentence_count >= 1);
    CHECK(tokenize(text).tokens == t.tokens);
  }
}

TEST_CASE("syllable heuristic") {
  CHECK(syllable_count("cat") == 1);
  CHECK(syllable_count("scared") == 1);
  CHECK(syllable_count("table") == 2);
  CHECK(syllable_count("the") == 1);
  CHECK(syllable_count("hmm") == 1);
  CHECK(syllable_count("memory") == 3);
  CHECK(syllable_count("happy") == 2);
}

TEST_CASE("readability of a single short sentence") {
  // 3 words, 1 sentence, 3 syllables counted by hand.
  const double expected = 206.835 - 1.015 * 3.0 / 1.0 - 84.6 * 3.0 / 3.0;
  CHECK(readability("The cat sat.") == doctest::Approx(expected).epsilon(1e-12));
  CHECK(readability("The cat sat.") == doctest::Approx(119.19).epsilon(1e-9));
  CHECK_THROWS_AS(readability("... !"), DomainError);
}

TEST_CASE("readability is invariant when the session is duplicated") {
  const Session s = test::load_one("sample_corpus.jsonl");
  Session twice = s;
  twice.turns.insert(twice.turns.end(), s.turns.begin(), s.turns.end());
  CHECK(readability(twice) == doctest::Approx(readability(s)).epsilon(1e-12));
}

TEST_CASE("readability falls as sentences get longer") {
  // Only one-syllable words, so syllables per word is fixed at 1.
  double previous = 1e9;
  for (int len = 1; len <= 12; ++len) {
    std::string sentence;
    for (int i = 0; i < len; ++i) sentence += (i ? " cat" : "Cat");
    sentence += ".";
    const double score = readability(sentence + " " + sentence);
    CHECK(score < previous);
    previous = score;
  }
}

TEST_CASE("type-token ratio") {
  CHECK(type_token_ratio({"i", "was", "scared", "i", "was"}) == doctest::Approx(0.6));
  CHECK(vocabulary_richness(test::make_session({T("I was scared"), C("i was")})) == doctest::Approx(0.6));
  CHECK(vocabulary_richness(test::make_session({T("one two"), C("three four")})) == 1.0);
  CHECK_THROWS_AS(vocabulary_richness(test::make_session({T("..."), C("!")})), DomainError);
}

TEST_CASE("type-token ratio bounds over random token lists") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> tokens;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t k = 0; k < n; ++k) tokens.push_back("w" + std::to_string(rng.below(20)));
    const double ttr = type_token_ratio(tokens);
    CHECK(ttr > 0.0);
    CHECK(ttr <= 1.0);
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    CHECK((ttr == 1.0) == (distinct.size() == tokens.size()));
  }
}

TEST_CASE("a session has lower TTR than its own first half") {
  SimParams p;
  p.session_count = 20;
  p.turns_per_session = {40, 4};
  p.seed = 9;
  const Corpus corpus = generate_corpus(p);
  for (const Session& s : corpus.sessions) {
    Session half = s;
    half.turns.resize(s.turns.size() / 2);
    CHECK(vocabulary_richness(s) < vocabulary_richness(half));
  }
}
