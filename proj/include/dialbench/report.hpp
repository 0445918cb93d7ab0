#pragma once

// Real-vs-synthetic comparison: per-session metrics, descriptive statistics,
// split-half correlations, rank tests, feature importance, and rendering.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialbench/fidelity.hpp"
#include "dialbench/lm.hpp"
#include "dialbench/metrics.hpp"
#include "dialbench/pe_metrics.hpp"
#include "dialbench/stats.hpp"
#include "dialbench/transcript.hpp"
#include "json.hpp"

namespace dialbench {

struct ReportConfig {
  MetricConfig metrics;
  LmOptions lm;
  MannWhitneyOptions mwu;
  ForestOptions forest;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  PeResources pe;
  std::optional<std::vector<FidelityAnnotation>> annotations;

  // Stable hash over every setting that can change a reported number.
  std::string hash() const;
};

struct SessionMetrics {
  std::string session_id;
  MetricVector system;
  PEMetricVector pe;
  std::string error;  // set when the session could not be scored
};

// Scores every session of a normalized corpus; output order follows input.
std::vector<SessionMetrics> compute_session_metrics(const Corpus& corpus, const NGramModel& model,
                                                    const Embedder& embedder, const MetricConfig& metrics,
                                                    const PeResources& pe, std::size_t workers);

// Splits a session into its even- and odd-numbered exchanges (consecutive
// turn pairs), so both halves keep both speakers and strict alternation.
std::pair<Session, Session> split_half_sessions(const Session& session);

struct MetricBlock {
  std::string metric_name;
  std::optional<double> real_mean;
  std::optional<double> real_sd;
  std::optional<double> synth_mean;
  std::optional<double> synth_sd;
  std::optional<double> real_rho;
  std::optional<double> synth_rho;
  std::optional<double> u_statistic;
  std::optional<double> p_value;
  std::optional<TestMethod> method;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  std::string note;  // why the test was skipped, if it was
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t real_sessions = 0;
  std::size_t synth_sessions = 0;
  std::string tool_version;
};

struct ComparisonReport {
  std::vector<MetricBlock> blocks;     // one per MetricVector field, field order
  std::vector<MetricBlock> pe_blocks;  // one per PEMetricVector field
  std::vector<ImportanceEntry> importance;
  bool importance_degenerate = false;
  std::string importance_note;  // set when importance was not computed
  std::optional<AdherenceSummary> adherence;
  Provenance provenance;
  std::vector<std::string> warnings;
};

// Both corpora need at least 3 sessions (InputError otherwise). Corpora are
// normalized here; callers may pass raw parsed input.
ComparisonReport build_report(const Corpus& real, const Corpus& synth, const ReportConfig& config);

enum class ReportFormat { Json, Csv, Markdown };
std::optional<ReportFormat> parse_report_format(std::string_view text);
// From a file extension: .json, .csv, .md / .markdown.
std::optional<ReportFormat> report_format_for_path(const std::string& path);

nlohmann::json report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const nlohmann::json& j);
std::string render(const ComparisonReport& report, ReportFormat format);

// Doubles rounded to 6 significant digits, -0 folded to 0, non-finite to
// null. Object keys are already sorted by nlohmann::json.
nlohmann::json canonicalize(const nlohmann::json& j);
double round_significant(double value, int digits = 6);

// Markdown p-value cell: values below 1e-10 display as "p < 0.001".
std::string format_p_value(const std::optional<double>& p);

// Per-session rows for the analyze command.
std::string render_session_csv(const std::vector<SessionMetrics>& rows);

std::string_view tool_version();

}  // namespace dialbench
