#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "mixlr/casework.hpp"

namespace httplib {
class Server;
}

namespace mixlr {

inline constexpr std::string_view kServerVersion = "0.1.0";

struct HttpResponse {
  int status = 200;
  std::string body;
};

// Request handlers, independent of the transport. Error bodies are
// {"error": {"code": ..., "message": ...}}.
class Service {
 public:
  explicit Service(std::shared_ptr<ModelStore> store, CaseOptions options = {});

  // POST /api/v1/evaluate
  //   {"interest": [...] | "a+b", "case": {"markers": {...}},
  //    "background": {fluid: level}, "fixed_present": [...], "fixed_absent": [...],
  //    "variant_id": "..."}
  HttpResponse evaluate(std::string_view body) const;
  // GET /api/v1/models
  HttpResponse models() const;
  // GET /api/v1/panel
  HttpResponse panel() const;

  ModelStore& store() const noexcept { return *store_; }

 private:
  std::shared_ptr<ModelStore> store_;
  CaseOptions options_;
};

// cpp-httplib server over a Service. Requests are handled concurrently.
class HttpServer {
 public:
  // Files under `static_dir`, if non-empty, are served at "/".
  HttpServer(std::shared_ptr<Service> service, const std::string& static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws ConfigError.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  std::shared_ptr<Service> service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace mixlr
