#pragma once

// Two-sample rank tests, split-half correlation, and permutation importance
// from a bagged decision-tree ensemble.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialbench/transcript.hpp"

namespace dialbench {

enum class TestMethod { Exact, NormalApprox };
std::string_view to_string(TestMethod method);

struct TestResult {
  std::string metric_name;
  double u_statistic = 0.0;  // U of sample_a: pairs a > b, ties count 1/2
  double p_value = 1.0;      // two-sided
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  TestMethod method = TestMethod::Exact;
};

struct MannWhitneyOptions {
  // Use the exact null distribution when n_a * n_b is at most this.
  std::size_t exact_threshold = 64;
};

// Two-sided Mann-Whitney U. Ties use mid-ranks in both branches: the exact
// branch enumerates the permutation distribution of the tied rank sum; the
// normal branch uses a tie-corrected variance and a continuity correction.
// Throws DomainError when either sample is empty.
TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          MannWhitneyOptions options = {});

// Mid-ranks (1-based) of values.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);
// Pearson on mid-ranks. nullopt when fewer than 3 pairs or either side has
// zero variance.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationEntry {
  std::string metric_name;
  CorpusLabel corpus_label = CorpusLabel::Other;
  std::optional<double> rho;  // nullopt: fewer than 3 usable sessions or constant half
  std::size_t n = 0;
};

// One session's metric recomputed on its two interleaved halves.
struct HalfPair {
  std::optional<double> first;
  std::optional<double> second;
};

// Split-half stability: Spearman correlation between the two half-values
// across sessions, using only sessions where both halves are defined.
CorrelationEntry intra_corpus_correlation(const std::vector<HalfPair>& halves,
                                          const std::string& metric_name, CorpusLabel label);

// --- classifier -----------------------------------------------------------

struct ForestOptions {
  std::size_t trees = 100;
  int max_depth = 3;
  std::size_t permutation_repeats = 10;
  std::size_t min_per_class = 10;
  std::size_t workers = 1;
};

struct ImportanceEntry {
  std::string feature_name;
  double importance_pct = 0.0;
};

struct ImportanceResult {
  std::vector<ImportanceEntry> entries;  // in feature order
  // Set when every feature scored zero and attribution fell back to uniform.
  bool degenerate = false;
  std::vector<std::string> dropped_features;
  std::size_t rows_used = 0;
};

// One row per session; nullopt cells are missing values.
using FeatureRow = std::vector<std::optional<double>>;

// Bagged CART (Gini) ensemble separating class A (label 0) from class B
// (label 1); importance is the mean out-of-bag accuracy drop when a feature
// column is permuted, floored at zero and scaled to sum to 100.
// Features undefined everywhere are dropped, then rows with any missing value.
// Throws DomainError when a class has fewer than min_per_class rows.
ImportanceResult feature_importance(const std::vector<std::string>& feature_names,
                                    const std::vector<FeatureRow>& class_a,
                                    const std::vector<FeatureRow>& class_b, std::uint64_t seed,
                                    ForestOptions options = {});

// Exposed for tests: a depth-limited Gini tree.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };

  static DecisionTree fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          std::span<const std::size_t> rows, int max_depth);
  int predict(std::span<const double> row) const;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  int build(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
            std::vector<std::size_t>& rows, int depth, int max_depth);
  std::vector<Node> nodes_;
};

}  // namespace dialbench
