#pragma once

// JSON API over one loaded corpus and an annotation directory, plus static
// serving of the annotation UI bundle.
//
//   GET  /api/sessions                              [{session_id, turn_count, annotated}]
//   GET  /api/sessions/{id}                         session
//   GET  /api/sessions/{id}/annotation?annotator=X  annotation or 404
//   PUT  /api/sessions/{id}/annotation              store; 409 on stale version
//   GET  /api/summary                               adherence + violation summary
//   GET  /api/checklist                             checklist registry
//
// Errors are {"status", "code", "message"} with status 400, 404, 409 or 500.

#include <map>
#include <memory>
#include <string>

#include "dialbench/fidelity.hpp"
#include "dialbench/transcript.hpp"

namespace dialbench {

struct ServerOptions {
  std::string static_dir;  // served at / when non-empty and present
  std::string cors_origin = "*";
};

class AnnotationServer {
 public:
  // The corpus is served as given; pass a normalized corpus so span turn
  // indices line up with the analysis tools.
  AnnotationServer(Corpus corpus, AnnotationStore& store, ServerOptions options = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port
  // or -1 on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(). Returns false if the socket failed.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dialbench
