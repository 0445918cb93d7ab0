#include "dialbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "dialbench/embedder.hpp"
#include "dialbench/error.hpp"
#include "dialbench/parallel.hpp"

namespace dialbench {

std::string_view tool_version() { return DIALBENCH_VERSION; }

std::string ReportConfig::hash() const {
  nlohmann::json rules = nlohmann::json::object();
  for (const auto& [group, patterns] : pe.rules->groups()) rules[group] = patterns;
  const nlohmann::json j = {
      {"metrics", metrics.to_json()},
      {"lm",
       {{"order", lm.order}, {"alpha", lm.alpha}, {"min_count", lm.min_count},
        {"end_of_utterance", lm.end_of_utterance}}},
      {"exact_threshold", mwu.exact_threshold},
      {"forest",
       {{"trees", forest.trees}, {"max_depth", forest.max_depth},
        {"permutation_repeats", forest.permutation_repeats}, {"min_per_class", forest.min_per_class}}},
      {"seed", seed},
      {"lexicon", {{"name", pe.lexicon->name()}, {"version", pe.lexicon->version()}, {"size", pe.lexicon->size()}}},
      {"rules", rules},
      {"redirection_window", pe.rules->redirection_window()},
      {"stopwords", pe.stopwords->size()},
      {"engagement_threshold", pe.config.engagement_threshold},
  };
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << stable_hash(j.dump(), 0);
  return out.str();
}

std::vector<SessionMetrics> compute_session_metrics(const Corpus& corpus, const NGramModel& model,
                                                    const Embedder& embedder, const MetricConfig& metrics,
                                                    const PeResources& pe, std::size_t workers) {
  std::vector<SessionMetrics> out(corpus.sessions.size());
  parallel_for(corpus.sessions.size(), workers, [&](std::size_t i) {
    const Session& s = corpus.sessions[i];
    SessionMetrics& row = out[i];
    row.session_id = s.session_id;
    try {
      row.system = compute_metric_vector(s, model, embedder, metrics);
      row.pe = compute_pe_metric_vector(s, embedder, pe);
    } catch (const DomainError& e) {
      row.system = {};
      row.pe = {};
      row.error = e.what();
    }
  });
  return out;
}

std::pair<Session, Session> split_half_sessions(const Session& session) {
  Session even;
  Session odd;
  for (Session* half : {&even, &odd}) {
    half->corpus_label = session.corpus_label;
    half->meta = session.meta;
  }
  even.session_id = session.session_id + "#even";
  odd.session_id = session.session_id + "#odd";
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    ((i / 2) % 2 == 0 ? even : odd).turns.push_back(session.turns[i]);
  }
  even.raw_turn_count = even.turns.size();
  odd.raw_turn_count = odd.turns.size();
  return {std::move(even), std::move(odd)};
}

namespace {

std::vector<double> defined(const std::vector<std::optional<double>>& values) {
  std::vector<double> out;
  for (const auto& v : values) {
    if (v && std::isfinite(*v)) out.push_back(*v);
  }
  return out;
}

struct Column {
  std::vector<std::optional<double>> full;
  std::vector<HalfPair> halves;
};

MetricBlock make_block(const std::string& name, const Column& real, const Column& synth,
                       const MannWhitneyOptions& mwu) {
  MetricBlock b;
  b.metric_name = name;
  const std::vector<double> r = defined(real.full);
  const std::vector<double> s = defined(synth.full);
  b.n_real = r.size();
  b.n_synth = s.size();
  if (!r.empty()) {
    const MeanSd m = mean_sd(r);
    b.real_mean = m.mean;
    b.real_sd = m.sd;
  }
  if (!s.empty()) {
    const MeanSd m = mean_sd(s);
    b.synth_mean = m.mean;
    b.synth_sd = m.sd;
  }
  b.real_rho = intra_corpus_correlation(real.halves, name, CorpusLabel::Real).rho;
  b.synth_rho = intra_corpus_correlation(synth.halves, name, CorpusLabel::Synthetic).rho;
  if (r.empty() || s.empty()) {
    b.note = std::string("undefined for every session of the ") + (r.empty() ? "real" : "synthetic") + " corpus";
    return b;
  }
  const TestResult t = mann_whitney_u(r, s, mwu);
  b.u_statistic = t.u_statistic;
  b.p_value = t.p_value;
  b.method = t.method;
  return b;
}

struct CorpusScores {
  std::vector<SessionMetrics> full;
  std::vector<SessionMetrics> even;
  std::vector<SessionMetrics> odd;
};

CorpusScores score(const Corpus& corpus, const NGramModel& model, const Embedder& embedder,
                   const ReportConfig& config) {
  Corpus halves;
  halves.label = corpus.label;
  for (const Session& s : corpus.sessions) {
    auto [even, odd] = split_half_sessions(s);
    halves.sessions.push_back(std::move(even));
    halves.sessions.push_back(std::move(odd));
  }
  CorpusScores out;
  out.full = compute_session_metrics(corpus, model, embedder, config.metrics, config.pe, config.workers);
  const auto half_rows =
      compute_session_metrics(halves, model, embedder, config.metrics, config.pe, config.workers);
  for (std::size_t i = 0; i < half_rows.size(); i += 2) {
    out.even.push_back(half_rows[i]);
    out.odd.push_back(half_rows[i + 1]);
  }
  return out;
}

template <typename Vector>
Column column(const CorpusScores& scores, MetricValue Vector::*member, Vector SessionMetrics::*which) {
  Column c;
  for (std::size_t i = 0; i < scores.full.size(); ++i) {
    c.full.push_back(scores.full[i].*which.*member);
    c.halves.push_back({scores.even[i].*which.*member, scores.odd[i].*which.*member});
  }
  return c;
}

}  // namespace

ComparisonReport build_report(const Corpus& real_input, const Corpus& synth_input, const ReportConfig& config) {
  if (real_input.sessions.size() < 3 || synth_input.sessions.size() < 3) {
    throw InputError("each corpus needs at least 3 sessions (got " + std::to_string(real_input.sessions.size()) +
                     " real and " + std::to_string(synth_input.sessions.size()) + " synthetic)");
  }
  const Corpus real = normalize_corpus(real_input);
  const Corpus synth = normalize_corpus(synth_input);

  const NGramModel model = train_reference_model(real, synth, config.seed, config.lm);
  const auto embedder = default_embedder(config.metrics.embedder_dimension, config.metrics.embedder_seed);

  const CorpusScores real_scores = score(real, model, *embedder, config);
  const CorpusScores synth_scores = score(synth, model, *embedder, config);

  ComparisonReport report;
  for (const auto* scores : {&real_scores, &synth_scores}) {
    for (const SessionMetrics& row : scores->full) {
      if (!row.error.empty()) report.warnings.push_back("session '" + row.session_id + "' not scored: " + row.error);
    }
  }

  for (const auto& f : MetricVector::fields()) {
    report.blocks.push_back(make_block(std::string(f.name), column(real_scores, f.member, &SessionMetrics::system),
                                       column(synth_scores, f.member, &SessionMetrics::system), config.mwu));
  }
  for (const auto& f : PEMetricVector::fields()) {
    report.pe_blocks.push_back(make_block(std::string(f.name), column(real_scores, f.member, &SessionMetrics::pe),
                                          column(synth_scores, f.member, &SessionMetrics::pe), config.mwu));
  }

  std::vector<std::string> names;
  for (const auto& f : MetricVector::fields()) names.emplace_back(f.name);
  auto rows = [&](const CorpusScores& scores) {
    std::vector<FeatureRow> out;
    for (const SessionMetrics& row : scores.full) {
      if (!row.error.empty()) continue;
      FeatureRow r;
      for (const auto& f : MetricVector::fields()) r.push_back(row.system.*f.member);
      out.push_back(std::move(r));
    }
    return out;
  };
  try {
    ForestOptions forest = config.forest;
    forest.workers = config.workers;
    const ImportanceResult imp = feature_importance(names, rows(real_scores), rows(synth_scores), config.seed, forest);
    report.importance = imp.entries;
    report.importance_degenerate = imp.degenerate;
    if (imp.degenerate) report.warnings.push_back("feature importance degenerate: uniform attribution");
    for (const auto& dropped : imp.dropped_features) {
      report.warnings.push_back("feature '" + dropped + "' undefined everywhere; dropped from importance");
    }
  } catch (const DomainError& e) {
    report.importance_note = e.what();
  }

  if (config.annotations) report.adherence = summarize_annotations(*config.annotations);

  report.provenance.config_hash = config.hash();
  report.provenance.seed = config.seed;
  report.provenance.real_sessions = real.sessions.size();
  report.provenance.synth_sessions = synth.sessions.size();
  report.provenance.tool_version = std::string(tool_version());
  return report;
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "md" || text == "markdown") return ReportFormat::Markdown;
  return std::nullopt;
}

std::optional<ReportFormat> report_format_for_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return std::nullopt;
  return parse_report_format(path.substr(dot + 1));
}

double round_significant(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value == 0.0 ? 0.0 : value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;
}

nlohmann::json canonicalize(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      nlohmann::json out = nlohmann::json::object();
      for (const auto& [k, v] : j.items()) out[k] = canonicalize(v);
      return out;
    }
    case nlohmann::json::value_t::array: {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& v : j) out.push_back(canonicalize(v));
      return out;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) return nullptr;
      return round_significant(v);
    }
    default:
      return j;
  }
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

nlohmann::json block_to_json(const MetricBlock& b) {
  return {{"metric_name", b.metric_name},
          {"real_mean", opt(b.real_mean)},
          {"real_sd", opt(b.real_sd)},
          {"synth_mean", opt(b.synth_mean)},
          {"synth_sd", opt(b.synth_sd)},
          {"real_rho", opt(b.real_rho)},
          {"synth_rho", opt(b.synth_rho)},
          {"u_statistic", opt(b.u_statistic)},
          {"p_value", opt(b.p_value)},
          {"method", b.method ? nlohmann::json(to_string(*b.method)) : nlohmann::json(nullptr)},
          {"n_real", b.n_real},
          {"n_synth", b.n_synth},
          {"note", b.note}};
}

MetricBlock block_from_json(const nlohmann::json& j) {
  MetricBlock b;
  b.metric_name = j.at("metric_name").get<std::string>();
  b.real_mean = opt_from(j, "real_mean");
  b.real_sd = opt_from(j, "real_sd");
  b.synth_mean = opt_from(j, "synth_mean");
  b.synth_sd = opt_from(j, "synth_sd");
  b.real_rho = opt_from(j, "real_rho");
  b.synth_rho = opt_from(j, "synth_rho");
  b.u_statistic = opt_from(j, "u_statistic");
  b.p_value = opt_from(j, "p_value");
  if (const auto& m = j.at("method"); !m.is_null()) {
    b.method = m.get<std::string>() == "exact" ? TestMethod::Exact : TestMethod::NormalApprox;
  }
  b.n_real = j.at("n_real").get<std::size_t>();
  b.n_synth = j.at("n_synth").get<std::size_t>();
  b.note = j.value("note", std::string());
  return b;
}

}  // namespace

nlohmann::json report_to_json(const ComparisonReport& r) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : r.blocks) blocks.push_back(block_to_json(b));
  nlohmann::json pe = nlohmann::json::array();
  for (const auto& b : r.pe_blocks) pe.push_back(block_to_json(b));
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.importance) {
    entries.push_back({{"feature_name", e.feature_name}, {"importance_pct", e.importance_pct}});
  }
  return {{"system_metrics", std::move(blocks)},
          {"pe_metrics", std::move(pe)},
          {"importance",
           {{"entries", std::move(entries)}, {"degenerate", r.importance_degenerate}, {"note", r.importance_note}}},
          {"adherence", r.adherence ? adherence_summary_to_json(*r.adherence) : nlohmann::json(nullptr)},
          {"provenance",
           {{"config_hash", r.provenance.config_hash},
            {"seed", r.provenance.seed},
            {"real_sessions", r.provenance.real_sessions},
            {"synth_sessions", r.provenance.synth_sessions},
            {"tool_version", r.provenance.tool_version}}},
          {"warnings", r.warnings},
          {"sd_convention", "population"}};
}

ComparisonReport report_from_json(const nlohmann::json& j) {
  try {
    ComparisonReport r;
    for (const auto& b : j.at("system_metrics")) r.blocks.push_back(block_from_json(b));
    for (const auto& b : j.at("pe_metrics")) r.pe_blocks.push_back(block_from_json(b));
    const auto& imp = j.at("importance");
    for (const auto& e : imp.at("entries")) {
      r.importance.push_back({e.at("feature_name").get<std::string>(), e.at("importance_pct").get<double>()});
    }
    r.importance_degenerate = imp.at("degenerate").get<bool>();
    r.importance_note = imp.value("note", std::string());
    if (const auto& a = j.at("adherence"); !a.is_null()) r.adherence = adherence_summary_from_json(a);
    const auto& p = j.at("provenance");
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    r.provenance.real_sessions = p.at("real_sessions").get<std::size_t>();
    r.provenance.synth_sessions = p.at("synth_sessions").get<std::size_t>();
    r.provenance.tool_version = p.at("tool_version").get<std::string>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed report JSON: ") + e.what());
  }
}

namespace {

std::string number(const std::optional<double>& v, const char* fmt = "%.6g") {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, round_significant(*v) + 0.0);
  return buf;
}

std::string render_csv(const ComparisonReport& r) {
  std::ostringstream out;
  out << "section,metric_name,real_mean,real_sd,synth_mean,synth_sd,real_rho,synth_rho,u_statistic,p_value,"
         "method,n_real,n_synth\n";
  auto row = [&](const char* section, const MetricBlock& b) {
    out << section << ',' << b.metric_name << ',' << number(b.real_mean) << ',' << number(b.real_sd) << ','
        << number(b.synth_mean) << ',' << number(b.synth_sd) << ',' << number(b.real_rho) << ','
        << number(b.synth_rho) << ',' << number(b.u_statistic) << ',' << number(b.p_value) << ','
        << (b.method ? to_string(*b.method) : "") << ',' << b.n_real << ',' << b.n_synth << '\n';
  };
  for (const auto& b : r.blocks) row("system", b);
  for (const auto& b : r.pe_blocks) row("pe", b);
  return out.str();
}

std::string mean_sd_cell(const std::optional<double>& mean, const std::optional<double>& sd) {
  if (!mean) return "n/a";
  return number(mean, "%.4g") + " ± " + number(sd, "%.4g");
}

std::string rho_cell(const std::optional<double>& rho) { return rho ? number(rho, "%.3f") : "n/a"; }

}  // namespace

// Values below 1e-10 collapse to one display bucket.
std::string format_p_value(const std::optional<double>& p) {
  if (!p) return "n/a";
  if (*p < 1e-10) return "p < 0.001";
  if (*p < 0.001) return number(p, "%.2e");
  return number(p, "%.4f");
}

namespace {

std::string render_markdown(const ComparisonReport& r) {
  std::ostringstream out;
  out << "# Real vs synthetic comparison\n\n";
  out << "Real sessions: " << r.provenance.real_sessions << ". Synthetic sessions: " << r.provenance.synth_sessions
      << ". Seed: " << r.provenance.seed << ". Config: `" << r.provenance.config_hash << "`. Version "
      << r.provenance.tool_version << ".\n\n";

  out << "## System-level metrics\n\n";
  out << "| Metric | Real (mean ± SD) | Synthetic (mean ± SD) | Real ρ | Synthetic ρ |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& b : r.blocks) {
    out << "| " << b.metric_name << " | " << mean_sd_cell(b.real_mean, b.real_sd) << " | "
        << mean_sd_cell(b.synth_mean, b.synth_sd) << " | " << rho_cell(b.real_rho) << " | " << rho_cell(b.synth_rho)
        << " |\n";
  }

  out << "\n## Mann-Whitney U tests\n\n";
  out << "| Metric | U | p | Method |\n|---|---|---|---|\n";
  for (const auto& b : r.blocks) {
    out << "| " << b.metric_name << " | " << (b.u_statistic ? number(b.u_statistic) : "n/a") << " | "
        << format_p_value(b.p_value) << " | " << (b.method ? to_string(*b.method) : b.note) << " |\n";
  }

  out << "\n## PE fidelity metrics\n\n";
  out << "| Metric | Real (mean ± SD) | Synthetic (mean ± SD) | U | p |\n|---|---|---|---|---|\n";
  for (const auto& b : r.pe_blocks) {
    out << "| " << b.metric_name << " | " << mean_sd_cell(b.real_mean, b.real_sd) << " | "
        << mean_sd_cell(b.synth_mean, b.synth_sd) << " | " << (b.u_statistic ? number(b.u_statistic) : "n/a")
        << " | " << format_p_value(b.p_value) << " |\n";
  }

  out << "\n## Feature importance\n\n";
  if (r.importance.empty()) {
    out << "Not computed: " << (r.importance_note.empty() ? "no features" : r.importance_note) << "\n";
  } else {
    std::vector<ImportanceEntry> sorted = r.importance;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.importance_pct > b.importance_pct; });
    out << "| Feature | Importance (%) |\n|---|---|\n";
    for (const auto& e : sorted) out << "| " << e.feature_name << " | " << number(e.importance_pct, "%.2f") << " |\n";
    if (r.importance_degenerate) out << "\nEvery feature scored zero; importance is spread uniformly.\n";
  }

  if (r.adherence) {
    const auto& a = *r.adherence;
    out << "\n## Checklist adherence\n\n";
    out << "Annotations: " << a.annotations << " (" << a.scored << " scored). Mean "
        << (a.mean ? number(a.mean, "%.3f") : "n/a") << ", SD " << (a.sd ? number(a.sd, "%.3f") : "n/a") << ".\n\n";
    if (!a.violations.empty()) {
      out << "| Category | Spans | Sessions | Rate |\n|---|---|---|---|\n";
      for (const auto* group : {&a.violations.violations, &a.violations.adherent}) {
        for (const auto& [name, c] : *group) {
          out << "| " << name << " | " << c.count << " | " << c.sessions << " | " << number(c.rate, "%.3f") << " |\n";
        }
      }
    }
  }

  if (!r.warnings.empty()) {
    out << "\n## Warnings\n\n";
    for (const auto& w : r.warnings) out << "- " << w << "\n";
  }

  out << "\n---\n\n";
  out << "SD is the population standard deviation (divisor n). ";
  out << "A p shown as \"p < 0.001\" is below 1e-10. ";
  out << "ρ is the Spearman correlation across sessions between values computed on alternating exchange halves; "
         "n/a marks an undefined value.\n";
  return out.str();
}

}  // namespace

std::string render(const ComparisonReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json:
      return canonicalize(report_to_json(report)).dump(2) + "\n";
    case ReportFormat::Csv:
      return render_csv(report);
    case ReportFormat::Markdown:
      return render_markdown(report);
  }
  throw InvariantError("unknown report format");
}

namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string render_session_csv(const std::vector<SessionMetrics>& rows) {
  std::ostringstream out;
  out << "session_id";
  for (const auto& f : MetricVector::fields()) out << ',' << f.name;
  for (const auto& f : PEMetricVector::fields()) out << ',' << f.name;
  out << ",error\n";
  for (const auto& row : rows) {
    out << csv_field(row.session_id);
    for (const auto& f : MetricVector::fields()) out << ',' << number(row.system.*f.member);
    for (const auto& f : PEMetricVector::fields()) out << ',' << number(row.pe.*f.member);
    out << ',' << csv_field(row.error) << '\n';
  }
  return out.str();
}

}  // namespace dialbench
