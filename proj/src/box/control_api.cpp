#include <json.hpp>

#include "faraday/box_controller.hpp"

namespace faraday::box {

using nlohmann::ordered_json;

std::string state_json(const BoxController& box) {
  const auto m = box.machine();
  const auto c = box.counts();
  ordered_json j{{"state", to_string(m.state)},
                 {"powered", m.powered},
                 {"lid_open_state", lid_open(m.state)},
                 {"deploy_armed", m.deploy_armed},
                 {"acquire_pending", m.acquire_pending},
                 {"session_open", m.session_open},
                 {"announced", m.announced},
                 {"serving", m.serving()},
                 {"network_active", box.network_active()},
                 {"inventory",
                  {{"keys", c.keys},
                   {"threshold", c.threshold},
                   {"acquired", c.acquired},
                   {"spent", c.spent},
                   {"erased", c.erased},
                   {"templates", c.templates},
                   {"has_bootloader", c.has_bootloader}}}};
  return j.dump();
}

std::string session_json(const BoxController& box) {
  const auto s = box.session();
  ordered_json macs = ordered_json::array();
  for (const auto& m : s.macs) {
    macs.push_back({{"mac", m.mac.str()}, {"stage", to_string(m.stage)}, {"image", m.image}, {"requests", m.requests}});
  }
  ordered_json j{{"started", s.started},
                 {"started_at_s", to_seconds(s.started_at)},
                 {"timeout_s", to_seconds(s.timeout)},
                 {"runtime_flashed", s.runtime_flashed},
                 {"erasure_failed", s.erasure_failed},
                 {"out_of_keys", s.out_of_keys},
                 {"macs", macs}};
  return j.dump();
}

std::string transcript_json(const BoxController& box, std::uint64_t since) {
  ordered_json entries = ordered_json::array();
  std::uint64_t last = since;
  for (const auto& e : box.transcript(since)) {
    entries.push_back({{"seq", e.seq}, {"t_s", to_seconds(e.at)}, {"id", to_string(e.id)}, {"text", e.text}});
    last = e.seq;
  }
  return ordered_json{{"last_seq", last}, {"entries", entries}}.dump();
}

net::Router control_router(const BoxController& box, std::function<SubmitResult(const BoxEvent&)> submit) {
  net::Router r;
  r.add("POST", "/box/event", [submit](const net::Request& req, const net::PathParams&) {
    const auto event = BoxEvent::from_json(faraday::to_string(req.body));
    if (!is_operator_event(event.kind)) {
      return net::Response::text(422, std::string(to_string(event.kind)) + " is not an operator event");
    }
    const auto res = submit(event);
    ordered_json j{{"handled", res.handled}, {"state", to_string(res.state)}};
    return net::Response::json(200, j.dump());
  });
  r.add("GET", "/box/state",
        [&box](const net::Request&, const net::PathParams&) { return net::Response::json(200, state_json(box)); });
  r.add("GET", "/box/session",
        [&box](const net::Request&, const net::PathParams&) { return net::Response::json(200, session_json(box)); });
  r.add("GET", "/box/transcript", [&box](const net::Request& req, const net::PathParams&) {
    std::uint64_t since = 0;
    if (auto s = req.param("since")) {
      try {
        since = std::stoull(*s);
      } catch (const std::exception&) {
        return net::Response::text(400, "bad since");
      }
    }
    return net::Response::json(200, transcript_json(box, since));
  });
  return r;
}

}  // namespace faraday::box
