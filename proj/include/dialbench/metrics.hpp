#pragma once

// Per-session structural, lexical, predictability and coherence metrics.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialbench/embedder.hpp"
#include "dialbench/lm.hpp"
#include "dialbench/transcript.hpp"
#include "json.hpp"

namespace dialbench {

using MetricValue = std::optional<double>;

enum class DurationMode { Auto, Timestamps, Words };

struct MetricConfig {
  double length_scale = 10000.0;
  // Upper edges of the turn-length bins; one extra bin catches everything
  // above the last edge.
  std::vector<double> entropy_bin_edges = {2, 4, 8, 16, 32, 64, 128};
  std::size_t embedder_dimension = HashedBagOfWords::kDefaultDimension;
  std::uint64_t embedder_seed = HashedBagOfWords::kDefaultSeed;
  DurationMode duration_mode = DurationMode::Auto;
  double words_per_duration_unit = 100.0;

  nlohmann::json to_json() const;
  static MetricConfig from_json(const nlohmann::json& j);
  static MetricConfig load(const std::string& path);
};

struct MetricVector {
  MetricValue norm_speaker_switches;
  MetricValue norm_total_turns;
  MetricValue norm_conversation_length;
  MetricValue avg_utterance_length;
  MetricValue utterance_length_sd;
  MetricValue norm_avg_turn_duration;
  MetricValue norm_turn_duration_sd;
  MetricValue norm_therapist_turns;
  MetricValue norm_client_turns;
  MetricValue norm_therapist_words;
  MetricValue norm_client_words;
  MetricValue turn_ratio_tc;
  MetricValue word_ratio_tc;
  MetricValue vocabulary_richness;
  MetricValue readability;
  MetricValue flow_entropy;
  MetricValue avg_perplexity;
  MetricValue semantic_coherence;
  MetricValue semantic_coherence_sd;
  MetricValue local_coherence;
  MetricValue coherence_sd;

  struct Field {
    std::string_view name;
    MetricValue MetricVector::*member;
  };
  static constexpr std::size_t kFieldCount = 21;
  static const std::array<Field, kFieldCount>& fields();

  // Looks a field up by name; throws InputError for unknown names.
  MetricValue get(std::string_view name) const;
};

// Mean and population standard deviation.
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& values);

// Shannon entropy (nats) of turn word counts histogrammed over the bins.
double flow_entropy(const std::vector<std::size_t>& turn_word_counts,
                    const std::vector<double>& bin_edges);
std::size_t entropy_bin(double value, const std::vector<double>& bin_edges);

struct CoherenceStats {
  MeanSd global;  // each turn vs. the full preceding prefix
  MeanSd local;   // adjacent turn pairs
};
CoherenceStats coherence(const Session& session, const Embedder& embedder);

// Session must be normalized and have at least two turns (DomainError
// otherwise).
MetricVector compute_metric_vector(const Session& session, const NGramModel& model,
                                   const Embedder& embedder, const MetricConfig& config = {});

}  // namespace dialbench
