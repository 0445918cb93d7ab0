// dialbench: validate, analyze, compare, simulate and serve dialogue corpora.
//
// Exit codes: 0 ok, 2 input error, 3 internal invariant violation.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dialbench/embedder.hpp"
#include "dialbench/error.hpp"
#include "dialbench/fidelity.hpp"
#include "dialbench/parallel.hpp"
#include "dialbench/report.hpp"
#include "dialbench/server.hpp"
#include "dialbench/simulator.hpp"

namespace fs = std::filesystem;
using namespace dialbench;

namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = default_worker_count();
  std::size_t exact_threshold = 64;
  std::string lexicon;
  std::string rules;
  std::string metric_config;
  std::string annotations;
  std::string format;
  std::string out;
  std::string real;
  std::string synth;
  std::string corpus;
  std::string params;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

// Values from --config apply only where the flag was not given.
class ConfigDefaults {
 public:
  template <typename T>
  void bind(CLI::App& app, const std::string& flag, const std::string& key, T* target, const std::string& help) {
    CLI::Option* opt = app.add_option(flag, *target, help);
    entries_.push_back({&app, opt, key, [target](const nlohmann::json& v) { *target = v.get<T>(); }});
  }
  void bind_existing(CLI::App& app, CLI::Option* opt, const std::string& key,
                     std::function<void(const nlohmann::json&)> set) {
    entries_.push_back({&app, opt, key, std::move(set)});
  }
  void apply(const std::string& path) const {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("malformed config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw InputError("config '" + path + "' must be a JSON object");
    for (const auto& e : entries_) {
      const auto it = j.find(e.key);
      // Subcommands share one Options struct; skip the ones not invoked.
      if (!e.app->parsed() || it == j.end() || e.option->count() > 0) continue;
      try {
        e.set(*it);
      } catch (const nlohmann::json::exception& ex) {
        throw InputError("config key '" + e.key + "': " + ex.what());
      }
    }
  }

 private:
  struct Entry {
    CLI::App* app;
    CLI::Option* option;
    std::string key;
    std::function<void(const nlohmann::json&)> set;
  };
  std::vector<Entry> entries_;
};

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out.flush()) throw InputError("cannot write '" + path + "'");
}

struct Resources {
  EmotionLexicon lexicon;
  std::optional<PatternRuleSet> rules;
  MetricConfig metrics;
  PeResources pe;

  explicit Resources(const Options& o) {
    lexicon = o.lexicon.empty() ? EmotionLexicon::bundled() : EmotionLexicon::load(o.lexicon);
    rules.emplace(o.rules.empty() ? PatternRuleSet::bundled() : PatternRuleSet::load(o.rules));
    if (!o.metric_config.empty()) metrics = MetricConfig::load(o.metric_config);
    pe.lexicon = &lexicon;
    pe.rules = &*rules;
  }
};

int run_validate(const Options& o) {
  const Corpus corpus = load_corpus(o.corpus, CorpusLabel::Other);
  normalize_corpus(corpus);
  std::cout << corpus.sessions.size() << " sessions\n";
  return 0;
}

int run_analyze(const Options& o) {
  const Resources res(o);
  const Corpus corpus = normalize_corpus(load_corpus(o.corpus, CorpusLabel::Other));
  const NGramModel model = NGramModel::train(corpus);
  const auto embedder = default_embedder(res.metrics.embedder_dimension, res.metrics.embedder_seed);
  const auto rows = compute_session_metrics(corpus, model, *embedder, res.metrics, res.pe, o.workers);
  std::string format = o.format;
  if (format.empty()) format = o.out.size() > 5 && o.out.ends_with(".json") ? "json" : "csv";
  if (format == "csv") {
    write_output(o.out, render_session_csv(rows));
  } else if (format == "json") {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json r = {{"session_id", row.session_id}, {"error", row.error}};
      for (const auto& f : MetricVector::fields()) {
        const auto v = row.system.*f.member;
        r[std::string(f.name)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
      }
      for (const auto& f : PEMetricVector::fields()) {
        const auto v = row.pe.*f.member;
        r[std::string(f.name)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
      }
      out.push_back(std::move(r));
    }
    write_output(o.out, canonicalize(out).dump(2) + "\n");
  } else {
    throw InputError("analyze supports csv or json output, not '" + format + "'");
  }
  std::size_t failed = 0;
  for (const auto& row : rows) failed += row.error.empty() ? 0 : 1;
  if (!o.out.empty() && o.out != "-") {
    std::cout << "analyzed " << rows.size() << " sessions (" << failed << " not scored) -> " << o.out << "\n";
  }
  return 0;
}

int run_compare(const Options& o) {
  const Resources res(o);
  ReportConfig config;
  config.metrics = res.metrics;
  config.pe = res.pe;
  config.seed = o.seed;
  config.workers = o.workers;
  config.mwu.exact_threshold = o.exact_threshold;
  if (!o.annotations.empty()) {
    if (!fs::is_directory(o.annotations)) throw InputError("annotation directory '" + o.annotations + "' not found");
    config.annotations = AnnotationStore(o.annotations).list();
  }

  ReportFormat format = ReportFormat::Markdown;
  if (!o.format.empty()) {
    const auto f = parse_report_format(o.format);
    if (!f) throw InputError("unknown format '" + o.format + "'");
    format = *f;
  } else if (!o.out.empty() && o.out != "-") {
    const auto f = report_format_for_path(o.out);
    if (!f) throw InputError("cannot infer a format from '" + o.out + "'; use --format");
    format = *f;
  }

  const Corpus real = load_corpus(o.real, CorpusLabel::Real);
  const Corpus synth = load_corpus(o.synth, CorpusLabel::Synthetic);
  const ComparisonReport report = build_report(real, synth, config);
  write_output(o.out, render(report, format));

  if (!o.out.empty() && o.out != "-") {
    std::size_t tested = 0;
    std::size_t significant = 0;
    for (const auto* blocks : {&report.blocks, &report.pe_blocks}) {
      for (const auto& b : *blocks) {
        if (!b.p_value) continue;
        ++tested;
        if (*b.p_value < 0.05) ++significant;
      }
    }
    std::cout << "compared " << report.provenance.real_sessions << " real vs " << report.provenance.synth_sessions
              << " synthetic sessions: " << significant << " of " << tested << " metrics differ at p < 0.05 -> "
              << o.out << "\n";
    for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  }
  return 0;
}

int run_simulate(const Options& o, bool seed_given) {
  SimParams params = SimParams::load(o.params);
  if (seed_given) params.seed = o.seed;
  const Corpus corpus = generate_corpus(params);
  std::ostringstream out;
  write_corpus(out, corpus);
  write_output(o.out, out.str());
  if (!o.out.empty() && o.out != "-") {
    std::cout << "generated " << corpus.sessions.size() << " sessions -> " << o.out << "\n";
  }
  return 0;
}

AnnotationServer* g_server = nullptr;

int run_serve(const Options& o) {
  if (o.annotations.empty()) throw InputError("serve needs --annotations DIR");
  Corpus corpus = normalize_corpus(load_corpus(o.corpus, CorpusLabel::Other));
  AnnotationStore store(o.annotations);
  AnnotationServer server(std::move(corpus), store, {o.static_dir, "*"});
  const int port = server.bind(o.host, o.port);
  if (port < 0) throw InputError("cannot bind " + o.host + ":" + std::to_string(o.port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving on http://" << o.host << ":" << port << "/" << std::endl;
  const bool ok = server.listen();
  g_server = nullptr;
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark synthetic therapy dialogue corpora against a reference corpus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));
  Options o;
  ConfigDefaults defaults;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON file supplying defaults for any flag")->check(CLI::ExistingFile);
    defaults.bind(*cmd, "--seed", "seed", &o.seed, "Random seed");
    defaults.bind(*cmd, "--workers", "workers", &o.workers, "Worker threads");
    defaults.bind(*cmd, "--lexicon", "lexicon", &o.lexicon, "Emotion lexicon TSV (default: bundled)");
    defaults.bind(*cmd, "--rules", "rules", &o.rules, "PE pattern rules JSON (default: bundled)");
    defaults.bind(*cmd, "--metric-config", "metric_config", &o.metric_config, "Metric config JSON");
    defaults.bind(*cmd, "--format", "format", &o.format, "Output format (json, csv, md); default from --out");
    defaults.bind(*cmd, "-o,--out", "out", &o.out, "Output file (default: stdout)");
  };

  auto* validate = app.add_subcommand("validate", "Check a transcript file and count its sessions");
  validate->add_option("corpus", o.corpus, "Transcript JSONL")->required();
  validate->add_option("--config", o.config_path, "Ignored; accepted for symmetry");

  auto* analyze = app.add_subcommand("analyze", "Per-session metric rows for one corpus");
  analyze->add_option("corpus", o.corpus, "Transcript JSONL")->required();
  common(analyze);

  auto* compare = app.add_subcommand("compare", "Compare a real and a synthetic corpus");
  common(compare);
  defaults.bind(*compare, "--real", "real", &o.real, "Reference corpus JSONL");
  defaults.bind(*compare, "--synth", "synth", &o.synth, "Synthetic corpus JSONL");
  defaults.bind(*compare, "--annotations", "annotations", &o.annotations, "Annotation directory");
  defaults.bind(*compare, "--exact-threshold", "exact_threshold", &o.exact_threshold,
                "Largest n_real*n_synth tested exactly");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus");
  simulate->add_option("--config", o.config_path, "JSON file supplying defaults for any flag");
  defaults.bind(*simulate, "--params", "params", &o.params, "Simulator parameters JSON");
  CLI::Option* sim_seed = simulate->add_option("--seed", o.seed, "Override the params seed");
  bool seed_from_config = false;
  defaults.bind_existing(*simulate, sim_seed, "seed", [&](const nlohmann::json& v) {
    o.seed = v.get<std::uint64_t>();
    seed_from_config = true;
  });
  defaults.bind(*simulate, "-o,--out", "out", &o.out, "Output JSONL (default: stdout)");

  auto* serve = app.add_subcommand("serve", "Serve sessions and annotations over HTTP");
  serve->add_option("--config", o.config_path, "JSON file supplying defaults for any flag");
  defaults.bind(*serve, "--corpus", "corpus", &o.corpus, "Transcript JSONL");
  defaults.bind(*serve, "--annotations", "annotations", &o.annotations, "Annotation directory");
  defaults.bind(*serve, "--port", "port", &o.port, "Port (0 picks a free one)");
  defaults.bind(*serve, "--host", "host", &o.host, "Bind address");
  defaults.bind(*serve, "--static", "static_dir", &o.static_dir, "Built UI bundle to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    defaults.apply(o.config_path);
    auto need = [](const std::string& value, const char* what) {
      if (value.empty()) throw InputError(std::string("missing ") + what);
    };
    if (validate->parsed()) return run_validate(o);
    if (analyze->parsed()) return run_analyze(o);
    if (compare->parsed()) {
      need(o.real, "--real");
      need(o.synth, "--synth");
      return run_compare(o);
    }
    if (simulate->parsed()) {
      need(o.params, "--params");
      return run_simulate(o, sim_seed->count() > 0 || seed_from_config);
    }
    if (serve->parsed()) {
      need(o.corpus, "--corpus");
      return run_serve(o);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
