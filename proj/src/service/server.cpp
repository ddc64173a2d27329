#include "wrapsim/service/server.hpp"

#include <deque>
#include <iostream>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "wrapsim/error.hpp"
#include "wrapsim/teaching/task.hpp"

namespace wrapsim::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

std::string query_value(std::string_view query, std::string_view key) {
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key) {
      return eq == std::string_view::npos ? std::string() : std::string(pair.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return {};
}

HttpReply json_reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpReply error_reply(int status, std::string_view message) {
  return json_reply(status, {{"error", message}});
}

json parse_body(std::string_view body, std::string_view idempotency_key) {
  json j = body.empty() ? json::object() : json::parse(body);
  if (!j.is_object()) throw InvalidInput("request body must be a JSON object");
  if (!idempotency_key.empty() && !j.contains("client_token")) {
    j["client_token"] = std::string(idempotency_key);
  }
  return j;
}

/// Recognizes /sessions/{id}/frames.
std::optional<std::string> frames_session(std::string_view target) {
  const auto parts = split_path(target.substr(0, target.find('?')));
  if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "frames") {
    return std::string(parts[1]);
  }
  return std::nullopt;
}

}  // namespace

HttpReply route(SessionService& service, std::string_view method, std::string_view target,
                std::string_view body, std::string_view idempotency_key) {
  const auto query_at = target.find('?');
  const auto path = target.substr(0, query_at);
  const auto query = query_at == std::string_view::npos ? std::string_view{}
                                                        : target.substr(query_at + 1);
  const auto p = split_path(path);
  const bool get = method == "GET";
  const bool post = method == "POST";
  auto request = [&] { return parse_body(body, idempotency_key); };

  try {
    if (p.size() == 1 && p[0] == "health" && get) return json_reply(200, {{"status", "ok"}});
    if (p.size() == 1 && p[0] == "tasks" && get) {
      json names = json::array();
      for (const auto& name : teaching::task_names()) names.push_back(name);
      return json_reply(200, names);
    }
    if (!p.empty() && p[0] == "sessions") {
      if (p.size() == 1 && post) return json_reply(201, service.create_session(request()));
      if (p.size() == 1 && get) return json_reply(200, service.session_ids());
      const std::string id(p.size() > 1 ? p[1] : std::string_view{});
      if (p.size() == 2 && get) return json_reply(200, service.session(id));
      if (p.size() == 3 && p[2] == "phase" && post) {
        return json_reply(200, service.set_phase(id, request()));
      }
      if (p.size() == 3 && p[2] == "samples" && post) {
        return json_reply(200, service.add_samples(id, request()));
      }
      if (p.size() == 3 && p[2] == "metrics" && get) return json_reply(200, service.metrics(id));
    }
    if (!p.empty() && p[0] == "experiments") {
      if (p.size() == 1 && post) return json_reply(201, service.create_experiment(request()));
      if (p.size() == 1 && get) return json_reply(200, service.experiment_ids());
      const std::string id(p.size() > 1 ? p[1] : std::string_view{});
      if (p.size() == 3 && p[2] == "next" && post) return json_reply(200, service.next_trial(id));
      if (p.size() == 3 && p[2] == "responses" && post) {
        return json_reply(200, service.submit_response(id, request()));
      }
    }
    if (p.size() == 2 && p[0] == "export" && get) {
      auto format = query_value(query, "format");
      if (format.empty()) format = "jsonl";
      auto text = service.export_log(std::string(p[1]), format);
      return {200, format == "csv" ? "text/csv" : "application/x-ndjson", std::move(text)};
    }
    return error_reply(404, "no route for " + std::string(method) + " " + std::string(path));
  } catch (const std::exception& e) {
    return error_reply(http_status(e), e.what());
  }
}

namespace {

class FrameSocket : public std::enable_shared_from_this<FrameSocket> {
 public:
  FrameSocket(tcp::socket socket, SessionService& service, std::string session_id)
      : ws_(std::move(socket)), service_(service), session_id_(std::move(session_id)) {}

  ~FrameSocket() {
    if (handle_) {
      try {
        service_.unsubscribe(session_id_, *handle_);
      } catch (const std::exception&) {
      }
    }
  }

  void accept(http::request<http::string_body> upgrade) {
    try {
      // Fails before the handshake for an unknown session.
      std::weak_ptr<FrameSocket> weak = shared_from_this();
      handle_ = service_.subscribe(session_id_, [weak](const std::string& frame) {
        if (auto self = weak.lock()) self->send(frame);
      });
    } catch (const std::exception& e) {
      auto res = std::make_shared<http::response<http::string_body>>(
          static_cast<http::status>(http_status(e)), upgrade.version());
      res->set(http::field::content_type, "application/json");
      res->body() = json{{"error", e.what()}}.dump();
      res->prepare_payload();
      auto self = shared_from_this();
      http::async_write(beast::get_lowest_layer(ws_), *res,
                        [self, res](beast::error_code, std::size_t) {
                          beast::error_code ec;
                          beast::get_lowest_layer(self->ws_).socket().shutdown(
                              tcp::socket::shutdown_both, ec);
                        });
      return;
    }
    ws_.text(true);
    ws_.async_accept(upgrade, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->open_ = true;
      self->read();
      self->flush();
    });
  }

  void send(const std::string& frame) {
    asio::post(ws_.get_executor(), [self = shared_from_this(), frame] {
      self->queue_.push_back(frame);
      self->flush();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        return;
      }
      self->buffer_.consume(self->buffer_.size());  // clients have nothing to say
      self->read();
    });
  }

  void flush() {
    if (!open_ || writing_ || queue_.empty()) return;
    writing_ = true;
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->writing_ = false;
                      self->queue_.pop_front();
                      if (ec) {
                        self->open_ = false;
                        return;
                      }
                      self->flush();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionService& service_;
  std::string session_id_;
  std::optional<std::uint64_t> handle_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool open_ = false;
  bool writing_ = false;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, SessionService& service)
      : stream_(std::move(socket)), service_(service) {}

  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) {
                         beast::error_code ignored;
                         self->stream_.socket().shutdown(tcp::socket::shutdown_both, ignored);
                         return;
                       }
                       self->handle();
                     });
  }

 private:
  void handle() {
    if (websocket::is_upgrade(request_)) {
      stream_.expires_never();
      const auto target = std::string(request_.target());
      if (auto id = frames_session(target)) {
        std::make_shared<FrameSocket>(stream_.release_socket(), service_, *id)
            ->accept(std::move(request_));
        return;
      }
    }

    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(request_.version());
    res->keep_alive(request_.keep_alive());
    res->set(http::field::server, "wrapsim");
    res->set(http::field::access_control_allow_origin, "*");
    if (request_.method() == http::verb::options) {
      res->result(http::status::no_content);
      res->set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res->set(http::field::access_control_allow_headers, "Content-Type, Idempotency-Key");
    } else {
      const auto key = request_["Idempotency-Key"];
      const auto method = request_.method_string();
      const auto target = request_.target();
      auto reply = route(service_, std::string_view(method.data(), method.size()),
                         std::string_view(target.data(), target.size()), request_.body(),
                         std::string_view(key.data(), key.size()));
      res->result(static_cast<http::status>(reply.status));
      res->set(http::field::content_type, reply.content_type);
      res->body() = std::move(reply.body);
    }
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (!res->keep_alive()) {
                          beast::error_code ignored;
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          return;
                        }
                        self->read();
                      });
  }

  beast::tcp_stream stream_;
  SessionService& service_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace

struct HttpServer::Impl {
  SessionService& service;
  asio::io_context io;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;

  Impl(SessionService& s, const std::string& address, unsigned short port)
      : service(s), acceptor(io) {
    const tcp::endpoint endpoint(asio::ip::make_address(address), port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(asio::socket_base::max_listen_connections);
  }

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<Connection>(std::move(socket), service)->read();
      }
      accept();
    });
  }
};

HttpServer::HttpServer(SessionService& service, const std::string& address, unsigned short port)
    : impl_(std::make_unique<Impl>(service, address, port)) {}

HttpServer::~HttpServer() { stop(); }

unsigned short HttpServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void HttpServer::start(std::size_t threads) {
  if (!impl_->threads.empty()) throw StateError("server already running");
  impl_->accept();
  for (std::size_t i = 0; i < std::max<std::size_t>(threads, 1); ++i) {
    impl_->threads.emplace_back([this] { impl_->io.run(); });
  }
}

void HttpServer::stop() {
  asio::post(impl_->io, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->io.stop();
  for (auto& t : impl_->threads) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
  impl_->threads.clear();
}

}  // namespace wrapsim::service
