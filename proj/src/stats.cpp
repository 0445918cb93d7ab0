#include "dialbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dialbench/error.hpp"
#include "dialbench/parallel.hpp"
#include "dialbench/rng.hpp"

namespace dialbench {

std::string_view to_string(TestMethod method) {
  return method == TestMethod::Exact ? "exact" : "normal";
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Exact two-sided p for the rank sum of sample a. Works on doubled mid-ranks,
// which are integers, so the tail comparison is exact.
double exact_p_value(const std::vector<long long>& doubled_ranks, std::size_t n_a,
                     long long observed_doubled_sum) {
  const std::size_t n = doubled_ranks.size();
  const long long max_sum = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0LL);
  // ways[k][s]: subsets of size k with doubled rank sum s.
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(doubled_ranks[i]);
    for (std::size_t k = std::min(n_a, i + 1); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
        dst[s] += src[s - r];
        if (s == r) break;
      }
    }
  }
  const long long center = static_cast<long long>(n_a) * static_cast<long long>(n + 1);
  const long long observed_dev = std::llabs(observed_doubled_sum - center);
  double total = 0.0;
  double extreme = 0.0;
  for (std::size_t s = 0; s <= static_cast<std::size_t>(max_sum); ++s) {
    const double w = ways[n_a][s];
    if (w == 0.0) continue;
    total += w;
    if (std::llabs(static_cast<long long>(s) - center) >= observed_dev) extreme += w;
  }
  return extreme / total;
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          MannWhitneyOptions options) {
  if (sample_a.empty() || sample_b.empty()) {
    throw DomainError("Mann-Whitney U needs two non-empty samples");
  }
  const std::size_t n_a = sample_a.size();
  const std::size_t n_b = sample_b.size();
  const std::size_t n = n_a + n_b;

  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  const std::vector<double> ranks = average_ranks(pooled);

  std::vector<long long> doubled(n);
  long long doubled_sum_a = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = std::llround(2.0 * ranks[i]);
    if (i < n_a) doubled_sum_a += doubled[i];
  }
  const double rank_sum_a = static_cast<double>(doubled_sum_a) / 2.0;
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);

  TestResult result;
  result.n_real = n_a;
  result.n_synth = n_b;
  result.u_statistic = rank_sum_a - na * (na + 1.0) / 2.0;

  if (n_a * n_b <= options.exact_threshold) {
    result.method = TestMethod::Exact;
    result.p_value = exact_p_value(doubled, n_a, doubled_sum_a);
  } else {
    result.method = TestMethod::NormalApprox;
    // Tie correction: sum over tie groups of t^3 - t.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double nn = static_cast<double>(n);
    const double variance = na * nb / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    const double mean = na * nb / 2.0;
    if (variance <= 0.0) {
      result.p_value = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(result.u_statistic - mean) - 0.5) / std::sqrt(variance);
      result.p_value = std::erfc(z / std::sqrt(2.0));
    }
  }
  result.p_value = std::clamp(result.p_value, 0.0, 1.0);
  return result;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvariantError("spearman on unequal lengths");
  if (x.size() < 3) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  auto constant = [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
  };
  if (constant(rx) || constant(ry)) return std::nullopt;
  return std::clamp(pearson(rx, ry), -1.0, 1.0);
}

CorrelationEntry intra_corpus_correlation(const std::vector<HalfPair>& halves,
                                          const std::string& metric_name, CorpusLabel label) {
  CorrelationEntry entry;
  entry.metric_name = metric_name;
  entry.corpus_label = label;
  std::vector<double> a;
  std::vector<double> b;
  for (const HalfPair& h : halves) {
    if (!h.first || !h.second || !std::isfinite(*h.first) || !std::isfinite(*h.second)) continue;
    a.push_back(*h.first);
    b.push_back(*h.second);
  }
  entry.n = a.size();
  entry.rho = spearman(a, b);
  return entry;
}

// ---------------------------------------------------------------------------
// Decision tree

namespace {

double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

}  // namespace

DecisionTree DecisionTree::fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                               std::span<const std::size_t> rows, int max_depth) {
  DecisionTree tree;
  std::vector<std::size_t> working(rows.begin(), rows.end());
  tree.build(x, y, working, 0, max_depth);
  return tree;
}

int DecisionTree::build(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                        std::vector<std::size_t>& rows, int depth, int max_depth) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  double positives = 0.0;
  for (const std::size_t r : rows) positives += y[r];
  const double total = static_cast<double>(rows.size());
  nodes_[static_cast<std::size_t>(index)].label = positives * 2.0 > total ? 1 : 0;
  if (depth >= max_depth || positives == 0.0 || positives == total || rows.size() < 2) {
    return index;
  }

  const double parent = gini(positives, total);
  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  const std::size_t features = x.empty() ? 0 : x.front().size();
  std::vector<std::size_t> order = rows;
  for (std::size_t f = 0; f < features; ++f) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x[a][f] < x[b][f] || (x[a][f] == x[b][f] && a < b);
    });
    double left_pos = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left_pos += y[order[i]];
      const double lo = x[order[i]][f];
      const double hi = x[order[i + 1]][f];
      if (lo == hi) continue;
      const double left_n = static_cast<double>(i + 1);
      const double right_n = total - left_n;
      const double impurity = (left_n * gini(left_pos, left_n) +
                               right_n * gini(positives - left_pos, right_n)) / total;
      const double gain = parent - impurity;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = static_cast<int>(f);
        best_threshold = lo + (hi - lo) / 2.0;
      }
    }
  }
  if (best_feature < 0) return index;

  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  for (const std::size_t r : rows) {
    (x[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  const int l = build(x, y, left, depth + 1, max_depth);
  const int r = build(x, y, right, depth + 1, max_depth);
  Node& node = nodes_[static_cast<std::size_t>(index)];
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = l;
  node.right = r;
  return index;
}

int DecisionTree::predict(std::span<const double> row) const {
  int i = 0;
  for (;;) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.feature < 0) return node.label;
    i = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
}

// ---------------------------------------------------------------------------
// Permutation importance

ImportanceResult feature_importance(const std::vector<std::string>& feature_names,
                                    const std::vector<FeatureRow>& class_a,
                                    const std::vector<FeatureRow>& class_b, std::uint64_t seed,
                                    ForestOptions options) {
  const std::size_t n_features = feature_names.size();
  ImportanceResult result;

  // Drop features that are undefined for every row, then rows with any gap.
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < n_features; ++f) {
    bool any = false;
    for (const auto* group : {&class_a, &class_b}) {
      for (const FeatureRow& row : *group) {
        if (row.size() != n_features) throw InvariantError("feature row width mismatch");
        any = any || (row[f].has_value() && std::isfinite(*row[f]));
      }
    }
    if (any) {
      kept.push_back(f);
    } else {
      result.dropped_features.push_back(feature_names[f]);
    }
  }

  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::size_t count[2] = {0, 0};
  int label = 0;
  for (const auto* group : {&class_a, &class_b}) {
    for (const FeatureRow& row : *group) {
      std::vector<double> values;
      bool complete = true;
      for (const std::size_t f : kept) {
        if (!row[f] || !std::isfinite(*row[f])) {
          complete = false;
          break;
        }
        values.push_back(*row[f]);
      }
      if (!complete) continue;
      x.push_back(std::move(values));
      y.push_back(label);
      ++count[label];
    }
    ++label;
  }
  if (count[0] < options.min_per_class || count[1] < options.min_per_class) {
    throw DomainError("feature importance needs at least " + std::to_string(options.min_per_class) +
                      " complete sessions per class (got " + std::to_string(count[0]) + " and " +
                      std::to_string(count[1]) + ")");
  }
  result.rows_used = x.size();

  const std::size_t n_rows = x.size();
  const std::size_t n_kept = kept.size();
  // drops[t][f]: mean accuracy drop for tree t; nullopt when the tree has no
  // out-of-bag rows.
  std::vector<std::optional<std::vector<double>>> drops(options.trees);

  parallel_for(options.trees, options.workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> sample(n_rows);
    std::vector<bool> in_bag(n_rows, false);
    for (std::size_t i = 0; i < n_rows; ++i) {
      sample[i] = static_cast<std::size_t>(rng.below(n_rows));
      in_bag[sample[i]] = true;
    }
    std::vector<std::size_t> oob;
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (!in_bag[i]) oob.push_back(i);
    }
    if (oob.empty()) return;
    const DecisionTree tree = DecisionTree::fit(x, y, sample, options.max_depth);

    auto accuracy = [&](auto&& value_of) {
      std::size_t correct = 0;
      std::vector<double> row(n_kept);
      for (std::size_t k = 0; k < oob.size(); ++k) {
        for (std::size_t f = 0; f < n_kept; ++f) row[f] = value_of(k, f);
        if (tree.predict(row) == y[oob[k]]) ++correct;
      }
      return static_cast<double>(correct) / static_cast<double>(oob.size());
    };
    const double base = accuracy([&](std::size_t k, std::size_t f) { return x[oob[k]][f]; });

    std::vector<double> tree_drops(n_kept, 0.0);
    std::vector<std::size_t> perm(oob.size());
    for (std::size_t f = 0; f < n_kept; ++f) {
      double sum = 0.0;
      for (std::size_t rep = 0; rep < options.permutation_repeats; ++rep) {
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<std::size_t>(perm));
        sum += base - accuracy([&](std::size_t k, std::size_t g) {
          return g == f ? x[oob[perm[k]]][g] : x[oob[k]][g];
        });
      }
      tree_drops[f] = sum / static_cast<double>(std::max<std::size_t>(1, options.permutation_repeats));
    }
    drops[t] = std::move(tree_drops);
  });

  std::vector<double> importance(n_kept, 0.0);
  std::size_t scored_trees = 0;
  for (const auto& d : drops) {
    if (!d) continue;
    ++scored_trees;
    for (std::size_t f = 0; f < n_kept; ++f) importance[f] += (*d)[f];
  }
  double total = 0.0;
  for (double& v : importance) {
    v = scored_trees == 0 ? 0.0 : std::max(0.0, v / static_cast<double>(scored_trees));
    total += v;
  }
  result.degenerate = total <= 0.0;
  for (std::size_t f = 0; f < n_kept; ++f) {
    const double pct = result.degenerate ? 100.0 / static_cast<double>(n_kept)
                                         : 100.0 * importance[f] / total;
    result.entries.push_back({feature_names[kept[f]], pct});
  }
  return result;
}

}  // namespace dialbench
