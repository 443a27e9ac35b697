#include <json.hpp>

#include "faraday/backend.hpp"
#include "faraday/keyfile.hpp"

namespace faraday::backend {

net::Router Backend::router(std::function<SimTime()> clock) {
  net::Router r;

  r.add("GET", "/firmware/{name}", [this](const net::Request&, const net::PathParams& p) {
    auto img = image(p.at("name"));
    if (!img) return net::Response::text(404, "unknown image");
    return net::Response::ok(firmware::encode_container(*img));
  });

  r.add("GET", "/keys", [this, clock](const net::Request& req, const net::PathParams&) {
    const auto count_str = req.param("count");
    if (!count_str) return net::Response::text(400, "missing count");
    std::size_t count = 0;
    try {
      count = std::stoul(*count_str);
    } catch (const std::exception&) {
      return net::Response::text(400, "bad count");
    }
    DownloadRequest dl{{}, count, req.header("X-Box-Token").value_or("")};
    try {
      auto resp = handle_box_download(dl, clock());
      std::vector<keyfile::Entry> entries;
      for (const auto& rec : resp.key_records) entries.push_back({rec.identity, rec.key});
      return net::Response::ok(keyfile::encode(entries));
    } catch (const crypto::AuthError&) {
      return net::Response::text(401, "bad box token");
    } catch (const ShortageError& e) {
      return net::Response::text(409, "shortage deficit=" + std::to_string(e.deficit()));
    }
  });

  r.add("POST", "/readings", [this, clock](const net::Request& req, const net::PathParams&) {
    const auto msg = crypto::SealedMessage::parse(req.body);
    try {
      ingest_reading(msg, clock());
      return net::Response::text(200, "accepted");
    } catch (const crypto::AuthError&) {
      return net::Response::text(401, "authentication failed");
    } catch (const UnknownIdentity&) {
      return net::Response::text(404, "unknown identity");
    } catch (const Rejected&) {
      return net::Response::text(403, "rejected");
    }
  });

  r.add("GET", "/status", [this](const net::Request&, const net::PathParams&) {
    const auto s = status();
    nlohmann::ordered_json j{{"fresh", s.fresh},
                             {"issued_to_box", s.issued_to_box},
                             {"in_use", s.in_use},
                             {"blacklisted", s.blacklisted},
                             {"readings", s.readings},
                             {"unknown_identity", s.unknown_identity},
                             {"auth_failures", s.auth_failures},
                             {"rejected", s.rejected}};
    return net::Response::json(200, j.dump());
  });

  return r;
}

}  // namespace faraday::backend
