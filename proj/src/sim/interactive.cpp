#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <thread>

#include "faraday/sim.hpp"

namespace faraday::sim {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> node_ids(const Json& body) {
  std::vector<std::string> ids;
  if (body.contains("node") && body["node"].is_string()) ids.push_back(body["node"].get<std::string>());
  if (body.contains("nodes") && body["nodes"].is_array()) {
    for (const auto& n : body["nodes"]) {
      if (!n.is_string()) throw DecodeError("node ids must be strings");
      ids.push_back(n.get<std::string>());
    }
  }
  if (ids.empty()) throw DecodeError("expected \"node\" or \"nodes\"");
  return ids;
}

Json parse_body(const net::Request& req) {
  try {
    return Json::parse(faraday::to_string(req.body));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("body is not valid JSON: ") + e.what());
  }
}

}  // namespace

struct InteractiveServer::Impl {
  ServeOptions options;
  Simulation sim;
  std::mutex sim_mu;  // held by the loop while it advances the clock

  std::mutex cmd_mu;
  std::deque<std::packaged_task<net::Response()>> commands;

  std::atomic<bool> stopping{false};
  std::thread loop;
  net::Router router;
  std::unique_ptr<net::HttpServer> http;

  Impl(Scenario scenario, ServeOptions opts) : options(opts), sim(std::move(scenario), true) {
    sim.set_unbounded(true);
  }

  /// Runs fn on the loop thread at the current simulation time.
  net::Response post(std::function<net::Response()> fn) {
    std::packaged_task<net::Response()> task(std::move(fn));
    auto fut = task.get_future();
    {
      std::lock_guard lock(cmd_mu);
      commands.push_back(std::move(task));
    }
    if (fut.wait_for(std::chrono::seconds(5)) != std::future_status::ready) {
      return net::Response::text(503, "simulation loop busy");
    }
    return fut.get();
  }

  void run_loop() {
    const auto start = Clock::now();
    while (!stopping) {
      const std::chrono::duration<double> wall = Clock::now() - start;
      const auto target = seconds(wall.count() * options.time_scale);
      std::deque<std::packaged_task<net::Response()>> pending;
      {
        std::lock_guard lock(cmd_mu);
        pending.swap(commands);
      }
      {
        std::lock_guard lock(sim_mu);
        sim.run_until(std::max(target, sim.now()));
        for (auto& task : pending) task();
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    std::lock_guard lock(cmd_mu);
    for (auto& task : commands) task();
    commands.clear();
  }

  Json nodes_json() {
    std::lock_guard lock(sim_mu);
    const auto box_key = sim.box().verifying_key();
    Json out = Json::array();
    for (const auto& n : sim.nodes()) {
      const auto& node = *n.node;
      out.push_back({{"id", n.spec.id},
                     {"mac", node.mac().str()},
                     {"inside", n.inside},
                     {"powered", n.powered},
                     {"in_field", n.in_field},
                     {"honesty", to_string(node.config().honesty)},
                     {"mode", to_string(node.mode())},
                     {"phase", to_string(node.phase())},
                     {"network", node.network() ? Json(*node.network()) : Json(nullptr)},
                     {"provisioned_by_box", node.mode() == node::Mode::Runtime && node.installed_pubkey() &&
                                                *node.installed_pubkey() == box_key}});
    }
    return Json{{"t_s", to_seconds(sim.now())}, {"lid_open", sim.lid_physically_open()}, {"nodes", out}};
  }

  Json attackers_json() {
    std::lock_guard lock(sim_mu);
    const auto keys = sim.issued_keys();
    Json out = Json::array();
    for (const auto& a : sim.scenario().attackers) {
      Json j{{"name", a.name},
             {"kind", a.kind == AttackerKind::RogueAp ? "rogue_ap" : "eavesdropper"},
             {"distance_cm", a.distance_cm}};
      if (a.kind == AttackerKind::RogueAp) {
        for (const auto& r : sim.rogues()) {
          if (r.spec.name != a.name) continue;
          j["active"] = r.spec.active;
          j["ptx_dbm"] = r.spec.ptx_dbm;
          j["joined_by"] = std::vector<std::string>(r.joined_by.begin(), r.joined_by.end());
        }
      } else {
        const auto s = sim.eavesdrop_logs().at(a.name).summarize(keys);
        j["frames"] = s.frames;
        j["decoded_in_box_bytes"] = s.decoded_in_box_bytes;
        j["key_pattern_matches"] = s.key_pattern_matches;
      }
      out.push_back(std::move(j));
    }
    return out;
  }

  void build_router() {
    router = box::control_router(sim.box(), [this](const box::BoxEvent& e) {
      box::SubmitResult result;
      post([&] {
        result = sim.submit(e);
        return net::Response::text(200, "ok");
      });
      return result;
    });

    router.add("GET", "/sim/nodes", [this](const net::Request&, const net::PathParams&) {
      return net::Response::json(200, nodes_json().dump());
    });
    const auto place_or_remove = [this](bool place) {
      return [this, place](const net::Request& req, const net::PathParams&) {
        const auto ids = node_ids(parse_body(req));
        return post([&]() {
          for (const auto& id : ids) {
            try {
              place ? sim.place_node(id) : sim.remove_node(id);
            } catch (const std::invalid_argument& e) {
              return net::Response::text(409, e.what());
            }
          }
          return net::Response::json(200, Json{{"ok", true}, {"nodes", ids}}.dump());
        });
      };
    };
    router.add("POST", "/sim/place", place_or_remove(true));
    router.add("POST", "/sim/remove", place_or_remove(false));
    router.add("GET", "/sim/attacker", [this](const net::Request&, const net::PathParams&) {
      return net::Response::json(200, attackers_json().dump());
    });
    router.add("POST", "/sim/attacker", [this](const net::Request& req, const net::PathParams&) {
      const auto body = parse_body(req);
      if (!body.contains("name") || !body["name"].is_string() || !body.contains("active") ||
          !body["active"].is_boolean()) {
        throw DecodeError("expected {\"name\": ..., \"active\": true|false}");
      }
      return post([&]() {
        try {
          sim.set_attacker_active(body["name"].get<std::string>(), body["active"].get<bool>());
        } catch (const std::invalid_argument& e) {
          return net::Response::text(404, e.what());
        }
        return net::Response::json(200, Json{{"ok", true}}.dump());
      });
    });
    router.add("GET", "/sim/clock", [this](const net::Request&, const net::PathParams&) {
      std::lock_guard lock(sim_mu);
      return net::Response::json(200, Json{{"t_s", to_seconds(sim.now())}, {"time_scale", options.time_scale}}.dump());
    });
  }

  // Server-sent events: "utterance" for each transcript entry after since,
  // "state" whenever the Box state document changes.
  void stream(const net::Request& req, const net::StreamSink& sink) {
    std::uint64_t since = 0;
    if (auto s = req.param("since")) since = std::stoull(*s);
    std::string last_state;
    auto last_beat = Clock::now();
    while (!stopping) {
      for (const auto& e : sim.box().transcript(since)) {
        const Json j{{"seq", e.seq}, {"t_s", to_seconds(e.at)}, {"id", to_string(e.id)}, {"text", e.text}};
        if (!sink("id: " + std::to_string(e.seq) + "\nevent: utterance\ndata: " + j.dump() + "\n\n")) return;
        since = e.seq;
      }
      auto state = box::state_json(sim.box());
      if (state != last_state) {
        if (!sink("event: state\ndata: " + state + "\n\n")) return;
        last_state = std::move(state);
      }
      if (Clock::now() - last_beat > std::chrono::seconds(1)) {
        if (!sink(": keepalive\n\n")) return;
        last_beat = Clock::now();
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
};

InteractiveServer::InteractiveServer(Scenario scenario, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {
  if (options.time_scale <= 0) throw std::invalid_argument("time scale must be positive");
  impl_->build_router();
}

InteractiveServer::~InteractiveServer() { stop(); }

int InteractiveServer::start() {
  auto& i = *impl_;
  i.http = std::make_unique<net::HttpServer>(i.router);
  i.http->add_stream("/sim/events", [&i](const net::Request& req, const net::StreamSink& sink) { i.stream(req, sink); });
  const int port = i.http->start(i.options.host, i.options.port);
  i.loop = std::thread([&i] { i.run_loop(); });
  return port;
}

void InteractiveServer::wait() {
  if (impl_->http) impl_->http->wait();
}

void InteractiveServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  if (impl_->http) impl_->http->stop();
  if (impl_->loop.joinable()) impl_->loop.join();
}

}  // namespace faraday::sim
