#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include "dialbench/server.hpp"
#include "doctest.h"
#include "httplib.h"
#include "support.hpp"

using namespace dialbench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Running {
  fs::path dir;
  std::unique_ptr<AnnotationStore> store;
  std::unique_ptr<AnnotationServer> server;
  std::thread thread;
  int port = -1;

  explicit Running(const std::string& tag, ServerOptions options = {}) {
    static std::atomic<int> counter{0};
    dir = fs::temp_directory_path() /
          ("dialbench_srv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    store = std::make_unique<AnnotationStore>(dir / "annotations");
    Corpus corpus = normalize_corpus(load_corpus(test::data_path("sample_corpus.jsonl"), CorpusLabel::Real));
    server = std::make_unique<AnnotationServer>(std::move(corpus), *store, std::move(options));
    port = server->bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    thread = std::thread([this] { server->listen(); });
    server->wait_until_ready();
  }

  ~Running() {
    server->stop();
    thread.join();
    fs::remove_all(dir);
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    c.set_read_timeout(10);
    return c;
  }
};

std::string annotation_path(const std::string& id) { return "/api/sessions/" + id + "/annotation"; }

}  // namespace

TEST_CASE("checklist and session listing") {
  Running srv("list");
  auto c = srv.client();
  auto res = c.Get("/api/checklist");
  REQUIRE(res);
  CHECK(res->status == 200);
  const json items = json::parse(res->body);
  REQUIRE(items.size() == 11);
  CHECK(items[0]["item_id"] == "rationale_explained");
  CHECK(items[0]["text"] == "Therapist explained rationale for imaginal?");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");

  res = c.Get("/api/sessions");
  REQUIRE(res);
  const json sessions = json::parse(res->body);
  REQUIRE(sessions.size() == 5);
  CHECK(sessions[0]["session_id"] == "pe-001");
  CHECK(sessions[0]["turn_count"] == 12);
  CHECK(sessions[0]["annotated"] == false);

  res = c.Get("/api/sessions/pe-002");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["turns"].size() == 12);

  res = c.Get("/api/sessions/nope");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["code"] == "unknown_session");

  res = c.Get("/api/elsewhere");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["status"] == 404);

  res = c.Options("/api/sessions");
  REQUIRE(res);
  CHECK(res->status == 204);
}

TEST_CASE("annotation round trip and version conflict") {
  Running srv("rt");
  auto c = srv.client();
  auto res = c.Get(annotation_path("pe-001") + "?annotator=alice");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["code"] == "not_annotated");
  res = c.Get(annotation_path("pe-001"));
  REQUIRE(res);
  CHECK(res->status == 400);

  FidelityAnnotation a = blank_annotation("pe-001", "alice");
  a.items[0].answer = Answer::Yes;
  a.spans.push_back({3, ViolationCategory::RoleDrift, "answered for the client", "alice"});
  res = c.Put(annotation_path("pe-001"), annotation_to_json(a).dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const FidelityAnnotation stored = annotation_from_json(json::parse(res->body));
  CHECK(stored.version == 1);
  CHECK_FALSE(stored.updated_at.empty());
  CHECK(stored.items == a.items);
  CHECK(stored.spans == a.spans);

  res = c.Get(annotation_path("pe-001") + "?annotator=alice");
  REQUIRE(res);
  CHECK(annotation_from_json(json::parse(res->body)) == stored);

  // Replaying the version-0 write is stale.
  res = c.Put(annotation_path("pe-001"), annotation_to_json(a).dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  const json conflict = json::parse(res->body);
  CHECK(conflict["code"] == "version_conflict");
  CHECK(conflict["current_version"] == 1);

  res = c.Put(annotation_path("pe-001"), annotation_to_json(stored).dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["version"] == 2);

  res = c.Get("/api/sessions");
  REQUIRE(res);
  CHECK(json::parse(res->body)[0]["annotated"] == true);

  res = c.Get("/api/summary");
  REQUIRE(res);
  const json summary = json::parse(res->body);
  CHECK(summary["annotations"] == 1);
  CHECK(summary["violations"]["role_drift"]["count"] == 1);
}

TEST_CASE("malformed and invalid bodies") {
  Running srv("bad");
  auto c = srv.client();
  auto res = c.Put(annotation_path("pe-001"), "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["code"] == "malformed_json");

  json body = annotation_to_json(blank_annotation("pe-001", "alice"));
  body["items"].erase(0);
  res = c.Put(annotation_path("pe-001"), body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["code"] == "schema_violation");

  // Span outside the session.
  FidelityAnnotation a = blank_annotation("pe-001", "alice");
  a.spans.push_back({99, ViolationCategory::RoleDrift, "", "alice"});
  res = c.Put(annotation_path("pe-001"), annotation_to_json(a).dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  // Body for a different session.
  res = c.Put(annotation_path("pe-002"), annotation_to_json(blank_annotation("pe-001", "alice")).dump(),
              "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = c.Put(annotation_path("ghost"), annotation_to_json(blank_annotation("ghost", "alice")).dump(),
              "application/json");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(srv.store->list().empty());
}

TEST_CASE("racing writers over HTTP") {
  Running srv("race");
  constexpr int kWriters = 12;
  std::atomic<int> ok{0};
  std::atomic<int> conflicts{0};
  {
    std::vector<std::jthread> threads;
    for (int w = 0; w < kWriters; ++w) {
      threads.emplace_back([&, w] {
        FidelityAnnotation a = blank_annotation("pe-003", "bob");
        a.items[1].answer = w % 2 ? Answer::Yes : Answer::No;
        auto c = srv.client();
        auto res = c.Put(annotation_path("pe-003"), annotation_to_json(a).dump(), "application/json");
        if (!res) return;
        if (res->status == 200) ++ok;
        if (res->status == 409) ++conflicts;
      });
    }
  }
  CHECK(ok == 1);
  CHECK(conflicts == kWriters - 1);
  CHECK(srv.store->get("pe-003", "bob")->version == 1);
}

TEST_CASE("static bundle is served at the root") {
  const fs::path web = fs::temp_directory_path() / ("dialbench_web_" + std::to_string(::getpid()));
  fs::create_directories(web);
  std::ofstream(web / "index.html") << "<html>annotate</html>";
  {
    ServerOptions options;
    options.static_dir = web.string();
    Running srv("static", options);
    auto c = srv.client();
    auto res = c.Get("/index.html");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "<html>annotate</html>");
    res = c.Get("/api/checklist");
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  {
    Running srv("nostatic");
    auto c = srv.client();
    auto res = c.Get("/");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.find("/api/") != std::string::npos);
  }
  fs::remove_all(web);
}
