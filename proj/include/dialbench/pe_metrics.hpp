#pragma once

// Prolonged-Exposure fidelity metrics computed from lexicons, phrase rules and
// within-session trends.
//
// Rule and lexicon content is data (see data/); everything here is mechanism.
// Metrics that cannot be computed for a session are std::nullopt and are
// excluded from statistical comparison rather than imputed.

#include <array>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dialbench/embedder.hpp"
#include "dialbench/metrics.hpp"
#include "dialbench/transcript.hpp"

namespace dialbench {

struct SudsEvent {
  std::size_t turn_index = 0;
  double value = 0.0;
  Speaker speaker = Speaker::Client;
  friend bool operator==(const SudsEvent&, const SudsEvent&) = default;
};

class EmotionLexicon {
 public:
  EmotionLexicon() = default;
  EmotionLexicon(std::unordered_map<std::string, double> entries, std::string name = {},
                 std::string version = {});

  // TSV: word<TAB>weight. '#' lines are comments; "# name: x" and
  // "# version: y" set the metadata.
  static EmotionLexicon parse_tsv(std::string_view text);
  static EmotionLexicon load(const std::string& path);
  static const EmotionLexicon& bundled();

  // 0 for words not in the lexicon.
  double weight(const std::string& word) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_map<std::string, double>& entries() const { return entries_; }
  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }

 private:
  std::unordered_map<std::string, double> entries_;
  std::string name_;
  std::string version_;
};

class PatternRuleSet {
 public:
  static constexpr const char* kGroups[] = {"avoidance_markers", "redirection_markers",
                                            "guidance_markers", "restructuring_markers",
                                            "engagement_markers"};

  // Every required group must be present and non-empty; patterns are
  // case-insensitive ECMAScript regexes.
  PatternRuleSet(std::map<std::string, std::vector<std::string>> groups,
                 std::size_t redirection_window = 2);

  // JSON: {group_name: [patterns...], "redirection_window": n}.
  static PatternRuleSet parse_json(std::string_view text);
  static PatternRuleSet load(const std::string& path);
  static const PatternRuleSet& bundled();

  bool matches(const std::string& group, std::string_view text) const;
  std::size_t redirection_window() const { return redirection_window_; }
  const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }

 private:
  std::map<std::string, std::vector<std::string>> groups_;
  std::map<std::string, std::regex> compiled_;
  std::size_t redirection_window_;
};

struct PeConfig {
  // A client turn with intensity above this counts as emotionally engaged.
  double engagement_threshold = 0.05;
};

struct PEMetricVector {
  MetricValue trauma_narrative_coherence;
  MetricValue emotional_engagement;
  MetricValue avoidance_handling;
  MetricValue exposure_guidance;
  MetricValue cognitive_restructuring;
  MetricValue emotional_habituation;
  MetricValue suds_progression;
  MetricValue avoidance_reduction;
  MetricValue emotion_intensity;
  MetricValue narrative_development;

  struct Field {
    std::string_view name;
    MetricValue PEMetricVector::*member;
  };
  static constexpr std::size_t kFieldCount = 10;
  static const std::array<Field, kFieldCount>& fields();
  MetricValue get(std::string_view name) const;
};

std::vector<SudsEvent> extract_suds(const Session& session);
// Last client rating minus first; nullopt with fewer than two client ratings.
std::optional<double> suds_progression(const std::vector<SudsEvent>& events);

// One value per client turn: summed lexicon weight / token count.
std::vector<double> emotion_intensity_series(const Session& session, const EmotionLexicon& lexicon);
// Mean of the first third minus mean of the last third; nullopt below 3 values.
std::optional<double> emotional_habituation(const std::vector<double>& series);

struct AvoidanceMetrics {
  std::optional<double> handling;  // nullopt when the client never avoids
  double reduction = 0.0;
  std::size_t events = 0;
  std::size_t handled = 0;
};
AvoidanceMetrics avoidance_metrics(const Session& session, const PatternRuleSet& rules);

struct MarkerDensities {
  std::optional<double> exposure_guidance;
  std::optional<double> cognitive_restructuring;
  std::optional<double> emotional_engagement;
};
MarkerDensities marker_density_metrics(const Session& session, const PatternRuleSet& rules,
                                       const EmotionLexicon& lexicon, const PeConfig& config = {});

struct NarrativeMetrics {
  double trauma_narrative_coherence = 0.0;
  double narrative_development = 0.0;
};
// Throws DomainError with fewer than two client turns.
NarrativeMetrics narrative_metrics(const Session& session, const Embedder& embedder,
                                   const std::unordered_set<std::string>& stopwords);
const std::unordered_set<std::string>& bundled_stopwords();
const std::vector<std::string>& discourse_connectives();

struct PeResources {
  const EmotionLexicon* lexicon = &EmotionLexicon::bundled();
  const PatternRuleSet* rules = &PatternRuleSet::bundled();
  const std::unordered_set<std::string>* stopwords = &bundled_stopwords();
  PeConfig config;
};

PEMetricVector compute_pe_metric_vector(const Session& session, const Embedder& embedder,
                                        const PeResources& resources = {});

// Index ranges used for start/end comparisons within a session.
struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};
// First and last floor(n/3) items.
std::pair<SplitRange, SplitRange> thirds(std::size_t n);
// First and last floor(n/2) items; the middle item of an odd count is in
// neither half.
std::pair<SplitRange, SplitRange> halves(std::size_t n);

}  // namespace dialbench
