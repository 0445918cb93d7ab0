#pragma once

// Parameterized synthetic corpora. Text is pseudo-words plus a handful of
// fixed phrases; only the statistics the metrics read are controlled.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dialbench/transcript.hpp"
#include "json.hpp"

namespace dialbench {

class EmotionLexicon;

struct NormalParam {
  double mean = 0.0;
  double sd = 0.0;
};

struct SudsPoint {
  double fraction = 0.0;  // position through the session's client turns, [0, 1]
  double value = 0.0;     // integer rating 0-100
};

struct SimParams {
  std::size_t session_count = 20;
  NormalParam turns_per_session{20.0, 4.0};
  NormalParam therapist_utterance_length{22.9, 1.7};
  NormalParam client_utterance_length{22.9, 1.7};
  std::vector<SudsPoint> suds_trajectory;
  double avoidance_rate = 0.0;           // per client turn
  double redirection_probability = 0.0;  // per avoidance
  double emotion_rate = 0.15;            // per client word, first third
  double emotion_decay = 1.0;            // multiplier per session third
  double guidance_rate = 0.0;            // per therapist turn
  double restructuring_rate = 0.0;       // per client turn
  std::size_t vocab_size = 2000;
  std::uint64_t seed = 0;
  CorpusLabel label = CorpusLabel::Synthetic;
  std::string id_prefix = "sim";

  // Throws InputError on out-of-range values.
  void validate() const;
  nlohmann::json to_json() const;
  static SimParams from_json(const nlohmann::json& j);
  static SimParams load(const std::string& path);
};

// Fixed phrases the generator injects; each matches exactly one rule group of
// the bundled rule set.
struct SimPhrases {
  static constexpr const char* kAvoidance = "I don't want to talk about it.";
  static constexpr const char* kRedirection = "Let's go back to the memory.";
  static constexpr const char* kGuidance = "Close your eyes now.";
  static constexpr const char* kRestructuring = "It wasn't my fault.";
};

// "My SUDS is about N right now."
std::string suds_statement(int value);

// Deterministic for fixed params. Sessions strictly alternate starting with
// the therapist and are already in normalized form.
Corpus generate_corpus(const SimParams& params);
Corpus generate_corpus(const SimParams& params, const EmotionLexicon& lexicon);

// The generator's pseudo-word vocabulary, most frequent first.
std::vector<std::string> simulator_vocabulary(std::size_t size, std::uint64_t seed);

}  // namespace dialbench
