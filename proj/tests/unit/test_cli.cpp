#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Workdir {
 public:
  Workdir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / ("dialbench_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  Result run(const std::string& args) const {
    const std::string out = file(".stdout");
    const std::string err = file(".stderr");
    const std::string cmd = std::string("'") + DIALBENCH_CLI_PATH + "' " + args + " >'" + out + "' 2>'" + err + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = test::read_text(out);
    r.err = test::read_text(err);
    return r;
  }

 private:
  fs::path path_;
};

const std::string kSample = test::data_path("sample_corpus.jsonl");
const std::string kParams = std::string(DIALBENCH_DATA_DIR) + "/sim_synthetic_like.json";

}  // namespace

TEST_CASE("validate reports the session count") {
  Workdir w;
  const Result r = w.run("validate '" + kSample + "'");
  CHECK(r.code == 0);
  CHECK(r.out == "5 sessions\n");
}

TEST_CASE("input errors exit with 2") {
  Workdir w;
  std::ofstream(w.file("bad.jsonl")) << R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"x"}]})"
                                     << "\n{oops\n";
  Result r = w.run("validate '" + w.file("bad.jsonl") + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("at line 2") != std::string::npos);

  r = w.run("validate '" + w.file("missing.jsonl") + "'");
  CHECK(r.code == 2);

  r = w.run("");
  CHECK(r.code == 2);
  r = w.run("frobnicate");
  CHECK(r.code == 2);
  r = w.run("compare --real '" + kSample + "'");
  CHECK(r.code == 2);

  // Fewer than three sessions per corpus.
  std::ofstream(w.file("two.jsonl"))
      << R"({"session_id":"a","corpus_label":"real","turns":[{"speaker":"T","text":"hi there"},{"speaker":"C","text":"hello you"}]})"
      << "\n"
      << R"({"session_id":"b","corpus_label":"real","turns":[{"speaker":"T","text":"hi there"},{"speaker":"C","text":"hello you"}]})"
      << "\n";
  r = w.run("compare --real '" + kSample + "' --synth '" + w.file("two.jsonl") + "' -o '" + w.file("r.json") + "'");
  CHECK(r.code == 2);

  r = w.run("compare --real '" + kSample + "' --synth '" + kSample + "' -o '" + w.file("r.txt") + "'");
  CHECK(r.code == 2);
}

TEST_CASE("help exits cleanly") {
  Workdir w;
  const Result r = w.run("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("compare") != std::string::npos);
  CHECK(w.run("compare --help").code == 0);
}

TEST_CASE("simulate is reproducible and the seed flag overrides") {
  Workdir w;
  REQUIRE(w.run("simulate --params '" + kParams + "' -o '" + w.file("a.jsonl") + "'").code == 0);
  REQUIRE(w.run("simulate --params '" + kParams + "' -o '" + w.file("b.jsonl") + "'").code == 0);
  REQUIRE(w.run("simulate --params '" + kParams + "' --seed 77 -o '" + w.file("c.jsonl") + "'").code == 0);
  const std::string a = test::read_text(w.file("a.jsonl"));
  CHECK_FALSE(a.empty());
  CHECK(a == test::read_text(w.file("b.jsonl")));
  CHECK(a != test::read_text(w.file("c.jsonl")));
  const Result v = w.run("validate '" + w.file("a.jsonl") + "'");
  CHECK(v.out == "40 sessions\n");

  std::ofstream(w.file("cfg.json")) << nlohmann::json{{"params", kParams}, {"seed", 77}, {"out", w.file("d.jsonl")}}.dump();
  REQUIRE(w.run("simulate --config '" + w.file("cfg.json") + "'").code == 0);
  CHECK(test::read_text(w.file("d.jsonl")) == test::read_text(w.file("c.jsonl")));
  // Explicit flags win over the config file.
  REQUIRE(w.run("simulate --config '" + w.file("cfg.json") + "' --seed 2 -o '" + w.file("e.jsonl") + "'").code == 0);
  CHECK(test::read_text(w.file("e.jsonl")) == a);
}

TEST_CASE("self comparison finds no differences") {
  Workdir w;
  REQUIRE(w.run("simulate --params '" + kParams + "' -o '" + w.file("s.jsonl") + "'").code == 0);
  const Result r = w.run("compare --real '" + w.file("s.jsonl") + "' --synth '" + w.file("s.jsonl") + "' -o '" +
                         w.file("r.json") + "' --workers 2");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("0 of") != std::string::npos);
  const auto report = nlohmann::json::parse(test::read_text(w.file("r.json")));
  for (const char* section : {"system_metrics", "pe_metrics"}) {
    for (const auto& block : report[section]) {
      if (block["p_value"].is_null()) continue;
      CHECK(block["p_value"].get<double>() >= 0.99);
      CHECK(block["real_mean"] == block["synth_mean"]);
    }
  }
}

TEST_CASE("compare output formats") {
  Workdir w;
  const std::string base = "compare --real '" + kSample + "' --synth '" + kSample + "' --seed 3";
  REQUIRE(w.run(base + " -o '" + w.file("r.md") + "'").code == 0);
  CHECK(test::read_text(w.file("r.md")).rfind("# Real vs synthetic comparison", 0) == 0);
  REQUIRE(w.run(base + " -o '" + w.file("r.csv") + "'").code == 0);
  CHECK(test::read_text(w.file("r.csv")).rfind("section,metric_name,", 0) == 0);
  const Result stdout_md = w.run(base);
  CHECK(stdout_md.code == 0);
  CHECK(stdout_md.out == test::read_text(w.file("r.md")));
  REQUIRE(w.run(base + " --format json -o '" + w.file("r.out") + "'").code == 0);
  CHECK_NOTHROW(nlohmann::json::parse(test::read_text(w.file("r.out"))));

  const Result with_ann =
      w.run(base + " --annotations '" + test::data_path("annotations") + "' -o '" + w.file("a.json") + "'");
  REQUIRE(with_ann.code == 0);
  CHECK(nlohmann::json::parse(test::read_text(w.file("a.json")))["adherence"]["annotations"] == 4);
}

TEST_CASE("analyze writes one row per session") {
  Workdir w;
  const Result r = w.run("analyze '" + kSample + "' -o '" + w.file("rows.csv") + "'");
  REQUIRE(r.code == 0);
  const std::string csv = test::read_text(w.file("rows.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  REQUIRE(w.run("analyze '" + kSample + "' -o '" + w.file("rows.json") + "'").code == 0);
  const auto rows = nlohmann::json::parse(test::read_text(w.file("rows.json")));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0]["session_id"] == "pe-001");
  CHECK(rows[0].contains("avg_perplexity"));
  CHECK(rows[0].contains("suds_progression"));
}
