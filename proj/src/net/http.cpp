#include "faraday/http.hpp"

#include <httplib.h>

#include <sstream>
#include <stdexcept>
#include <thread>

namespace faraday::net {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else if (s[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

std::optional<std::string> Request::header(const std::string& name) const {
  const auto want = lower(name);
  for (const auto& [k, v] : headers) {
    if (lower(k) == want) return v;
  }
  return std::nullopt;
}

std::optional<std::string> Request::param(const std::string& name) const {
  auto it = query.find(name);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

std::size_t Request::wire_size() const {
  std::size_t n = method.size() + path.size() + body.size() + 32;
  for (const auto& [k, v] : query) n += k.size() + v.size() + 2;
  for (const auto& [k, v] : headers) n += k.size() + v.size() + 4;
  return n;
}

Response Response::ok(Bytes body, std::string content_type) {
  return Response{200, std::move(content_type), std::move(body)};
}

Response Response::text(int status, std::string_view body) {
  return Response{status, "text/plain", to_bytes(body)};
}

Response Response::json(int status, const std::string& body) {
  return Response{status, "application/json", to_bytes(body)};
}

Request make_request(std::string method, std::string_view target, Bytes body) {
  Request req;
  req.method = std::move(method);
  req.body = std::move(body);
  const auto q = target.find('?');
  req.path = std::string(target.substr(0, q));
  if (q != std::string_view::npos) {
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      auto pair = rest.substr(0, amp);
      const auto eq = pair.find('=');
      if (eq == std::string_view::npos) {
        req.query[percent_decode(pair)] = "";
      } else {
        req.query[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
      }
      if (amp == std::string_view::npos) break;
      rest = rest.substr(amp + 1);
    }
  }
  return req;
}

void Router::add(std::string method, std::string pattern, Handler handler) {
  routes_.push_back(Route{std::move(method), split_path(pattern), std::move(handler)});
}

Response Router::handle(const Request& req) const {
  const auto segs = split_path(req.path);
  bool path_matched = false;
  for (const auto& route : routes_) {
    if (route.segments.size() != segs.size()) continue;
    PathParams params;
    bool match = true;
    for (std::size_t i = 0; i < segs.size() && match; ++i) {
      const auto& pat = route.segments[i];
      if (pat.size() > 2 && pat.front() == '{' && pat.back() == '}') {
        params[pat.substr(1, pat.size() - 2)] = percent_decode(segs[i]);
      } else {
        match = pat == segs[i];
      }
    }
    if (!match) continue;
    path_matched = true;
    if (route.method != req.method) continue;
    try {
      return route.handler(req, params);
    } catch (const DecodeError& e) {
      return Response::text(400, e.what());
    } catch (const std::invalid_argument& e) {
      return Response::text(400, e.what());
    }
  }
  return path_matched ? Response::text(405, "method not allowed") : Response::text(404, "not found");
}

Transport Router::as_transport() const {
  return [self = *this](const Request& req) { return self.handle(req); };
}

Transport http_client(std::string host, int port, double timeout_s) {
  return [host = std::move(host), port, timeout_s](const Request& req) -> Response {
    httplib::Client cli(host, port);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    httplib::Headers headers(req.headers.begin(), req.headers.end());
    httplib::Params params(req.query.begin(), req.query.end());
    const std::string path = req.query.empty() ? req.path : httplib::append_query_params(req.path, params);
    httplib::Result res;
    if (req.method == "GET") {
      res = cli.Get(path, headers);
    } else if (req.method == "POST") {
      res = cli.Post(path, headers, reinterpret_cast<const char*>(req.body.data()), req.body.size(),
                     "application/octet-stream");
    } else {
      return Response::text(0, "unsupported method");
    }
    if (!res) return Response::text(0, "unreachable: " + httplib::to_string(res.error()));
    Response out;
    out.status = res->status;
    out.content_type = res->get_header_value("Content-Type");
    out.body = to_bytes(res->body);
    return out;
  };
}

struct HttpServer::Impl {
  const Router& router;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const Router& r) : router(r) {}
};

namespace {

Request from_httplib(const httplib::Request& r) {
  Request req;
  req.method = r.method;
  req.path = r.path;
  for (const auto& [k, v] : r.params) req.query[k] = v;
  for (const auto& [k, v] : r.headers) req.headers[k] = v;
  req.body = to_bytes(r.body);
  req.peer = r.remote_addr;
  return req;
}

}  // namespace

HttpServer::HttpServer(const Router& router) : impl_(std::make_unique<Impl>(router)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::add_stream(std::string path, StreamHandler handler) {
  impl_->server.Get(path, [handler = std::move(handler)](const httplib::Request& r, httplib::Response& res) {
    auto req = from_httplib(r);
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream",
                                     [handler, req](size_t, httplib::DataSink& sink) {
                                       handler(req, [&sink](std::string_view chunk) {
                                         return sink.is_writable() && sink.write(chunk.data(), chunk.size());
                                       });
                                       sink.done();
                                       return true;
                                     });
  });
}

int HttpServer::start(const std::string& host, int port) {
  // Catch-all routes go last so stream paths registered earlier win.
  auto dispatch = [this](const httplib::Request& r, httplib::Response& res) {
    const auto out = impl_->router.handle(from_httplib(r));
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(reinterpret_cast<const char*>(out.body.data()), out.body.size(),
                    out.content_type.c_str());
  };
  impl_->server.Get(".*", dispatch);
  impl_->server.Post(".*", dispatch);

  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::pair<std::string, int> parse_listen(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("listen address must be host:port");
  const auto host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
  return {host.empty() ? "0.0.0.0" : host, port};
}

}  // namespace faraday::net
