#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "wrapsim/service/session_service.hpp"

namespace wrapsim::service {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Maps one HTTP request onto the service. `target` is the request path
/// including any query string. An `idempotency_key` is used as the client
/// token when the body does not carry one.
HttpReply route(SessionService& service, std::string_view method, std::string_view target,
                std::string_view body, std::string_view idempotency_key = {});

/// HTTP and WebSocket front end. WebSocket clients connect to
/// /sessions/{id}/frames and receive every RenderFrame rendered from then on
/// as one text message each.
class HttpServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  HttpServer(SessionService& service, const std::string& address = "127.0.0.1",
             unsigned short port = 8080);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  unsigned short port() const;

  /// Serves on `threads` background threads.
  void start(std::size_t threads = 4);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wrapsim::service
