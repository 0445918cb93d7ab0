#include "dialbench/server.hpp"

#include <filesystem>
#include <set>

#include "dialbench/error.hpp"
#include "httplib.h"

namespace dialbench {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                nlohmann::json extra = nlohmann::json::object()) {
  extra["status"] = status;
  extra["code"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

}  // namespace

struct AnnotationServer::Impl {
  Corpus corpus;
  std::map<std::string, const Session*> by_id;
  AnnotationStore& store;
  ServerOptions options;
  httplib::Server http;

  Impl(Corpus c, AnnotationStore& s, ServerOptions o) : corpus(std::move(c)), store(s), options(std::move(o)) {
    for (const Session& session : corpus.sessions) by_id[session.session_id] = &session;
    routes();
  }

  const Session* find(const std::string& id) const {
    const auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : it->second;
  }

  std::vector<FidelityAnnotation> corpus_annotations() const {
    std::vector<FidelityAnnotation> out;
    for (auto& a : store.list()) {
      if (by_id.count(a.session_id)) out.push_back(std::move(a));
    }
    return out;
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, PUT, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});

    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Get("/api/checklist", [](const httplib::Request&, httplib::Response& res) {
      nlohmann::json items = nlohmann::json::array();
      for (const auto& def : checklist_registry()) {
        items.push_back({{"item_id", def.item_id}, {"text", def.text}});
      }
      send_json(res, 200, items);
    });

    http.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
      std::set<std::string> annotated;
      for (const auto& a : store.list()) annotated.insert(a.session_id);
      nlohmann::json out = nlohmann::json::array();
      for (const Session& s : corpus.sessions) {
        out.push_back({{"session_id", s.session_id},
                       {"turn_count", s.turns.size()},
                       {"annotated", annotated.count(s.session_id) > 0}});
      }
      send_json(res, 200, out);
    });

    http.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const Session* s = find(req.matches[1]);
      if (!s) return send_error(res, 404, "unknown_session", "no session '" + std::string(req.matches[1]) + "'");
      send_json(res, 200, session_to_json(*s));
    });

    http.Get(R"(/api/sessions/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!find(id)) return send_error(res, 404, "unknown_session", "no session '" + id + "'");
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) return send_error(res, 400, "missing_annotator", "query parameter 'annotator' is required");
      const auto a = store.get(id, annotator);
      if (!a) return send_error(res, 404, "not_annotated", "no annotation by '" + annotator + "' for '" + id + "'");
      send_json(res, 200, annotation_to_json(*a));
    });

    http.Put(R"(/api/sessions/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const Session* s = find(id);
      if (!s) return send_error(res, 404, "unknown_session", "no session '" + id + "'");
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        return send_error(res, 400, "malformed_json", e.what());
      }
      FidelityAnnotation a;
      try {
        a = annotation_from_json(body, s->turns.size());
      } catch (const InputError& e) {
        return send_error(res, 400, "schema_violation", e.what());
      }
      if (a.session_id != id) {
        return send_error(res, 400, "schema_violation", "body session_id '" + a.session_id + "' does not match URL");
      }
      const std::string annotator = req.get_param_value("annotator");
      if (!annotator.empty() && annotator != a.annotator_id) {
        return send_error(res, 400, "schema_violation", "body annotator_id does not match query parameter");
      }
      try {
        send_json(res, 200, annotation_to_json(store.put(a, s->turns.size())));
      } catch (const VersionConflict& e) {
        send_error(res, 409, "version_conflict", e.what(), {{"current_version", e.current()}});
      }
    });

    http.Get("/api/summary", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, adherence_summary_to_json(summarize_annotations(corpus_annotations())));
    });

    if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir)) {
      http.set_mount_point("/", options.static_dir);
    } else {
      http.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("annotation UI not installed; the API is under /api/\n", "text/plain");
      });
    }

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      send_error(res, 500, "internal", message);
    });

    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) return send_error(res, 404, "not_found", "no route for " + req.path);
      if (res.status >= 500) return send_error(res, 500, "internal", "internal error");
      if (res.status == 400) return send_error(res, 400, "bad_request", "bad request");
    });
  }
};

AnnotationServer::AnnotationServer(Corpus corpus, AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(corpus), store, std::move(options))) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::listen() { return impl_->http.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_) impl_->http.stop();
}

void AnnotationServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace dialbench
