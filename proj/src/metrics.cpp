#include "dialbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"

namespace dialbench {
namespace {

std::string_view to_string(DurationMode mode) {
  switch (mode) {
    case DurationMode::Timestamps:
      return "timestamps";
    case DurationMode::Words:
      return "words";
    case DurationMode::Auto:
      break;
  }
  return "auto";
}

DurationMode parse_duration_mode(const std::string& text) {
  if (text == "auto") return DurationMode::Auto;
  if (text == "timestamps") return DurationMode::Timestamps;
  if (text == "words") return DurationMode::Words;
  throw InputError("unknown duration_mode '" + text + "'");
}

}  // namespace

nlohmann::json MetricConfig::to_json() const {
  return {{"length_scale", length_scale},
          {"entropy_bin_edges", entropy_bin_edges},
          {"embedder_dimension", embedder_dimension},
          {"embedder_seed", embedder_seed},
          {"duration_mode", to_string(duration_mode)},
          {"words_per_duration_unit", words_per_duration_unit}};
}

MetricConfig MetricConfig::from_json(const nlohmann::json& j) {
  MetricConfig c;
  try {
    c.length_scale = j.value("length_scale", c.length_scale);
    c.entropy_bin_edges = j.value("entropy_bin_edges", c.entropy_bin_edges);
    c.embedder_dimension = j.value("embedder_dimension", c.embedder_dimension);
    c.embedder_seed = j.value("embedder_seed", c.embedder_seed);
    c.duration_mode = parse_duration_mode(j.value("duration_mode", std::string("auto")));
    c.words_per_duration_unit = j.value("words_per_duration_unit", c.words_per_duration_unit);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid metric config: ") + e.what());
  }
  if (!(c.length_scale > 0.0)) throw InputError("length_scale must be positive");
  if (!(c.words_per_duration_unit > 0.0)) throw InputError("words_per_duration_unit must be positive");
  if (c.embedder_dimension == 0) throw InputError("embedder_dimension must be positive");
  if (c.entropy_bin_edges.empty() ||
      !std::is_sorted(c.entropy_bin_edges.begin(), c.entropy_bin_edges.end(),
                      std::less_equal<>())) {
    throw InputError("entropy_bin_edges must be non-empty and strictly increasing");
  }
  return c;
}

MetricConfig MetricConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open metric config '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed metric config '" + path + "': " + e.what());
  }
}

const std::array<MetricVector::Field, MetricVector::kFieldCount>& MetricVector::fields() {
  static const std::array<Field, kFieldCount> kFields = {{
      {"norm_speaker_switches", &MetricVector::norm_speaker_switches},
      {"norm_total_turns", &MetricVector::norm_total_turns},
      {"norm_conversation_length", &MetricVector::norm_conversation_length},
      {"avg_utterance_length", &MetricVector::avg_utterance_length},
      {"utterance_length_sd", &MetricVector::utterance_length_sd},
      {"norm_avg_turn_duration", &MetricVector::norm_avg_turn_duration},
      {"norm_turn_duration_sd", &MetricVector::norm_turn_duration_sd},
      {"norm_therapist_turns", &MetricVector::norm_therapist_turns},
      {"norm_client_turns", &MetricVector::norm_client_turns},
      {"norm_therapist_words", &MetricVector::norm_therapist_words},
      {"norm_client_words", &MetricVector::norm_client_words},
      {"turn_ratio_tc", &MetricVector::turn_ratio_tc},
      {"word_ratio_tc", &MetricVector::word_ratio_tc},
      {"vocabulary_richness", &MetricVector::vocabulary_richness},
      {"readability", &MetricVector::readability},
      {"flow_entropy", &MetricVector::flow_entropy},
      {"avg_perplexity", &MetricVector::avg_perplexity},
      {"semantic_coherence", &MetricVector::semantic_coherence},
      {"semantic_coherence_sd", &MetricVector::semantic_coherence_sd},
      {"local_coherence", &MetricVector::local_coherence},
      {"coherence_sd", &MetricVector::coherence_sd},
  }};
  return kFields;
}

MetricValue MetricVector::get(std::string_view name) const {
  for (const Field& f : fields()) {
    if (f.name == name) return this->*f.member;
  }
  throw InputError("unknown metric '" + std::string(name) + "'");
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (const double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

std::size_t entropy_bin(double value, const std::vector<double>& bin_edges) {
  const auto it = std::lower_bound(bin_edges.begin(), bin_edges.end(), value);
  return static_cast<std::size_t>(it - bin_edges.begin());
}

double flow_entropy(const std::vector<std::size_t>& turn_word_counts,
                    const std::vector<double>& bin_edges) {
  if (turn_word_counts.empty()) return 0.0;
  std::vector<std::size_t> histogram(bin_edges.size() + 1, 0);
  for (const std::size_t n : turn_word_counts) {
    ++histogram[entropy_bin(static_cast<double>(n), bin_edges)];
  }
  const double total = static_cast<double>(turn_word_counts.size());
  double h = 0.0;
  for (const std::size_t c : histogram) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

CoherenceStats coherence(const Session& session, const Embedder& embedder) {
  const auto& turns = session.turns;
  std::vector<Embedding> embeddings;
  embeddings.reserve(turns.size());
  for (const Turn& t : turns) embeddings.push_back(embedder.embed(t.text));

  std::vector<double> global;
  std::vector<double> local;
  for (std::size_t i = 1; i < turns.size(); ++i) {
    local.push_back(cosine(embeddings[i - 1], embeddings[i]));
  }

  if (auto first = embedder.additive_part(turns.front().text)) {
    Embedding prefix = std::move(*first);
    for (std::size_t i = 1; i < turns.size(); ++i) {
      global.push_back(cosine(embeddings[i], prefix));
      const auto part = embedder.additive_part(turns[i].text);
      for (std::size_t d = 0; d < prefix.size(); ++d) prefix[d] += (*part)[d];
    }
  } else {
    std::string prefix = turns.front().text;
    for (std::size_t i = 1; i < turns.size(); ++i) {
      global.push_back(cosine(embeddings[i], embedder.embed(prefix)));
      prefix += ' ';
      prefix += turns[i].text;
    }
  }
  return {mean_sd(global), mean_sd(local)};
}

MetricVector compute_metric_vector(const Session& session, const NGramModel& model,
                                   const Embedder& embedder, const MetricConfig& config) {
  const auto& turns = session.turns;
  if (turns.size() < 2) throw DomainError("session too short for turn-pair metrics");

  const double n_turns = static_cast<double>(turns.size());
  std::vector<std::size_t> turn_words;
  std::vector<double> turn_words_real;
  double therapist_turns = 0.0;
  double therapist_words = 0.0;
  double client_words = 0.0;
  bool all_timed = true;
  for (const Turn& t : turns) {
    const std::size_t w = word_count(t.text);
    turn_words.push_back(w);
    turn_words_real.push_back(static_cast<double>(w));
    if (t.speaker == Speaker::Therapist) {
      therapist_turns += 1.0;
      therapist_words += static_cast<double>(w);
    } else {
      client_words += static_cast<double>(w);
    }
    all_timed = all_timed && t.has_timing();
  }
  const double client_turns = n_turns - therapist_turns;
  const double total_words = therapist_words + client_words;

  MetricVector m;
  const std::size_t raw = std::max(session.raw_turn_count, turns.size());
  // Merging only removes same-speaker adjacencies, so the raw sequence has
  // exactly as many speaker changes as the merged one.
  double switches = 0.0;
  for (std::size_t i = 1; i < turns.size(); ++i) {
    if (turns[i].speaker != turns[i - 1].speaker) switches += 1.0;
  }
  m.norm_speaker_switches = switches / static_cast<double>(raw - 1);
  m.norm_total_turns = std::min(therapist_turns, client_turns) / std::max(therapist_turns, client_turns);
  m.norm_conversation_length = total_words / config.length_scale;

  const MeanSd length = mean_sd(turn_words_real);
  m.avg_utterance_length = length.mean;
  m.utterance_length_sd = length.sd;

  bool use_timestamps = false;
  switch (config.duration_mode) {
    case DurationMode::Auto:
      use_timestamps = all_timed;
      break;
    case DurationMode::Timestamps:
      if (!all_timed) throw DomainError("duration_mode=timestamps but session '" +
                                        session.session_id + "' has untimed turns");
      use_timestamps = true;
      break;
    case DurationMode::Words:
      break;
  }
  std::vector<double> durations;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (use_timestamps) {
      durations.push_back(static_cast<double>(*turns[i].end_ms - *turns[i].start_ms) / 60000.0);
    } else {
      durations.push_back(turn_words_real[i] / config.words_per_duration_unit);
    }
  }
  const MeanSd duration = mean_sd(durations);
  m.norm_avg_turn_duration = duration.mean;
  m.norm_turn_duration_sd = duration.sd;

  m.norm_therapist_turns = therapist_turns / n_turns;
  m.norm_client_turns = client_turns / n_turns;
  m.norm_therapist_words = therapist_words / n_turns;
  m.norm_client_words = client_words / n_turns;
  if (client_turns > 0.0) m.turn_ratio_tc = therapist_turns / client_turns;
  if (client_words > 0.0) m.word_ratio_tc = therapist_words / client_words;

  if (total_words > 0.0) {
    m.vocabulary_richness = vocabulary_richness(session);
    m.readability = readability(session);
    m.avg_perplexity = model.avg_perplexity(session);
  }
  m.flow_entropy = flow_entropy(turn_words, config.entropy_bin_edges);

  const CoherenceStats coh = coherence(session, embedder);
  m.semantic_coherence = coh.global.mean;
  m.semantic_coherence_sd = coh.global.sd;
  m.local_coherence = coh.local.mean;
  m.coherence_sd = coh.local.sd;
  return m;
}

}  // namespace dialbench
