#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faraday/bytes.hpp"

// Minimal request/response model shared by the simulated network and the
// real HTTP bindings. Handlers never see a socket.
namespace faraday::net {

struct Request {
  std::string method = "GET";
  std::string path = "/";
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  Bytes body;
  std::string peer;  // link-layer address of the sender, set by the network

  std::optional<std::string> header(const std::string& name) const;
  std::optional<std::string> param(const std::string& name) const;
  std::size_t wire_size() const;
};

struct Response {
  int status = 200;
  std::string content_type = "application/octet-stream";
  Bytes body;

  static Response ok(Bytes body, std::string content_type = "application/octet-stream");
  static Response text(int status, std::string_view body);
  static Response json(int status, const std::string& body);
  std::string body_string() const { return to_string(body); }
  std::size_t wire_size() const { return body.size() + 64; }
};

/// "/keys?count=4" -> path + query map (percent-decoding included).
Request make_request(std::string method, std::string_view target, Bytes body = {});

using PathParams = std::map<std::string, std::string>;
using Handler = std::function<Response(const Request&, const PathParams&)>;
using Transport = std::function<Response(const Request&)>;

/// Routes "METHOD /literal/{param}" patterns. Unknown paths yield 404,
/// known paths with the wrong method 405.
class Router {
 public:
  void add(std::string method, std::string pattern, Handler handler);
  Response handle(const Request& req) const;
  /// The transport holds its own copy of the routes.
  Transport as_transport() const;

 private:
  struct Route {
    std::string method;
    std::vector<std::string> segments;
    Handler handler;
  };
  std::vector<Route> routes_;
};

/// Transport that issues real HTTP requests. status 0 means unreachable.
Transport http_client(std::string host, int port, double timeout_s = 5.0);

/// Long-lived push channel: the producer calls sink(chunk) until it returns
/// false (client gone) or the producer returns.
using StreamSink = std::function<bool(std::string_view)>;
using StreamHandler = std::function<void(const Request&, const StreamSink&)>;

/// Serves a Router over real HTTP on a background thread.
class HttpServer {
 public:
  explicit HttpServer(const Router& router);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void add_stream(std::string path, StreamHandler handler);

  /// Binds (port 0 picks a free port) and starts serving. Throws
  /// std::runtime_error on bind failure. Returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// "host:port" -> pair; throws std::invalid_argument.
std::pair<std::string, int> parse_listen(const std::string& addr);

}  // namespace faraday::net
