#include <cstdio>
#include <stdexcept>

#include "faraday/sim.hpp"

namespace faraday::sim {

namespace {

constexpr std::uint64_t kScriptEntity = 0;
constexpr std::uint64_t kBoxEntity = 1;
constexpr std::uint64_t kBackendEntity = 2;
constexpr std::uint64_t kMonitorEntity = 3;
constexpr std::uint64_t kRogueEntityBase = 1000;
constexpr const char* kBoxNetwork = "box";

SimTime airtime(std::size_t bytes, double rate_bps) {
  return seconds(static_cast<double>(bytes) * 8.0 / rate_bps);
}

Bytes request_wire(const net::Request& req) {
  std::string head = req.method + " " + req.path;
  char sep = '?';
  for (const auto& [k, v] : req.query) {
    head += sep + k + "=" + v;
    sep = '&';
  }
  head += "\r\n";
  Bytes wire = to_bytes(head);
  wire.insert(wire.end(), req.body.begin(), req.body.end());
  return wire;
}

Bytes response_wire(const net::Response& resp) {
  Bytes wire = to_bytes(std::to_string(resp.status) + " " + resp.content_type + "\r\n");
  wire.insert(wire.end(), resp.body.begin(), resp.body.end());
  return wire;
}

std::unique_ptr<crypto::RandomSource> make_rng(bool deterministic, std::uint64_t seed, const char* label) {
  if (deterministic) return std::make_unique<crypto::SeededRandom>(seed, label);
  return std::make_unique<crypto::SystemRandom>();
}

}  // namespace

Simulation::Simulation(Scenario scenario, bool deterministic)
    : scenario_(std::move(scenario)), deterministic_(deterministic) {
  validate_scenario(scenario_);
  rng_ = make_rng(deterministic_, scenario_.seed, "sim");
  box_rng_ = make_rng(deterministic_, scenario_.seed, "box");
  rogue_rng_ = make_rng(deterministic_, scenario_.seed, "rogue");

  const auto& bp = scenario_.backend;
  backend_ = std::make_unique<backend::Backend>(bp.config);
  backend_->register_image(backend::build_bootloader_base(scenario_.box.config.bootloader_image, bp.bootloader_size));
  for (const auto& t : bp.templates) backend_->build_and_register_template(t.name, t.size);
  if (bp.initial_keys > 0) backend_->create_keys(bp.initial_keys, *rng_);
  backend_router_ = backend_->router([this] { return now_; });

  auto cfg = scenario_.box.config;
  cfg.paths = scenario_.factory.paths;
  cfg.box_token = bp.config.box_token;
  if (!scenario_.nodes.empty()) {
    const auto& c = scenario_.nodes.front().config;
    cfg.erasure_memory_bytes = c.memory_size - c.bootloader_region;
  }
  box_ = std::make_unique<box::BoxController>(cfg, box::Hsm::generate(*box_rng_), *box_rng_);
  box_->set_action_sink([this](const box::Action& a, SimTime at) { on_box_action(a, at); });
  box_radio_ = calibrate_box(scenario_.box);

  for (const auto& spec : scenario_.nodes) {
    NodeEntity n;
    n.spec = spec;
    n.node = std::make_unique<node::SensorNode>(spec.config, scenario_.factory, scenario_.seed);
    nodes_.push_back(std::move(n));
  }
  for (const auto& a : scenario_.attackers) {
    if (a.kind == AttackerKind::Eavesdropper) {
      eavesdroppers_.push_back(a);
      eavesdrop_[a.name];
    } else {
      RogueEntity r;
      r.spec = a;
      r.server = std::make_unique<RogueOtaServer>(scenario_.factory.paths, *rogue_rng_);
      rogues_.push_back(std::move(r));
    }
  }

  double last = 0;
  for (const auto& st : scenario_.script) last = std::max(last, st.at_s);
  horizon_ = scenario_.duration_s ? seconds(*scenario_.duration_s)
                                  : seconds(last) + scenario_.box.config.deploy_timeout + seconds(5);

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].spec.placed) {
      nodes_[i].inside = true;
      schedule(SimTime::zero(), node_entity(i), [this, i] { boot_node(i); });
    }
  }
  schedule_script();
  schedule_monitor(SimTime::zero());
}

Simulation::~Simulation() {
  if (box_) box_->set_action_sink(nullptr);
}

void Simulation::schedule(SimTime at, std::uint64_t entity, std::function<void()> fn) {
  queue_.push(Event{at, entity, seq_++, std::move(fn)});
}

void Simulation::run_until(SimTime t) {
  while (!queue_.empty() && queue_.top().at <= t) {
    auto ev = queue_.top();
    queue_.pop();
    if (ev.at < now_) throw std::logic_error("event scheduled in the past");
    now_ = ev.at;
    ev.fn();
  }
  if (t > now_) now_ = t;
}

void Simulation::run() {
  // Periodic events stop at the horizon; what remains are in-flight
  // exchanges and timers, which always terminate.
  std::size_t guard = 0;
  while (!queue_.empty()) {
    if (++guard > 50'000'000) throw std::runtime_error("simulation did not terminate");
    auto ev = queue_.top();
    queue_.pop();
    if (ev.at < now_) throw std::logic_error("event scheduled in the past");
    now_ = ev.at;
    ev.fn();
  }
}

void Simulation::say_log(const std::string& line) {
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "%10.6f ", to_seconds(now_));
  log_.push_back(stamp + line);
}

// ---- script ---------------------------------------------------------------

void Simulation::schedule_script() {
  for (const auto& step : scenario_.script) {
    schedule(seconds(step.at_s), kScriptEntity, [this, step] { execute_step(step); });
  }
}

void Simulation::execute_step(const ScriptStep& step) {
  const auto& a = step.action;
  const auto node_arg = [&] { return step.args.at("node").get<std::string>(); };
  try {
    if (a == "power_on") {
      submit(box::BoxEvent::simple(box::EventKind::PowerOn));
    } else if (a == "lid_open") {
      submit(box::BoxEvent::simple(box::EventKind::LidOpened));
    } else if (a == "lid_close") {
      submit(box::BoxEvent::simple(box::EventKind::LidClosed));
    } else if (a == "press_acquire") {
      submit(box::BoxEvent::simple(box::EventKind::PressAcquire));
    } else if (a == "press_deploy") {
      submit(box::BoxEvent::simple(box::EventKind::PressDeploy));
    } else if (a == "place_node") {
      place_node(node_arg());
    } else if (a == "remove_node") {
      remove_node(node_arg());
    } else if (a == "remove_nodes") {
      for (const auto& n : nodes_) {
        if (n.inside) remove_node(n.spec.id);
      }
    } else if (a == "deploy_field") {
      deploy_field();
    } else if (a == "send_readings") {
      send_readings(step.args.value("count", std::size_t{1}));
    } else if (a == "replay_reading") {
      replay_reading(node_arg());
    } else if (a == "enter_bootloader") {
      const auto i = node_index(node_arg());
      nodes_[i].node->enter_bootloader_mode();
      nodes_[i].in_field = false;
      say_log("node " + nodes_[i].spec.id + ": switched to bootloader mode");
      if (nodes_[i].inside && nodes_[i].powered) schedule_scan(i, now_);
    } else if (a == "blacklist_sweep") {
      const double hours = step.args.value("offset_h", 0.0);
      const auto at = now_ + std::chrono::duration_cast<SimTime>(std::chrono::duration<double, std::ratio<3600>>(hours));
      const auto ids = backend_->blacklist_sweep(at);
      say_log("backend: blacklist sweep marked " + std::to_string(ids.size()) + " keys");
    } else if (a == "backend_offline") {
      backend_online_ = false;
      say_log("backend: offline");
    } else if (a == "backend_online") {
      backend_online_ = true;
      say_log("backend: online");
    } else if (a == "attacker_on" || a == "attacker_off") {
      set_attacker_active(step.args.at("name").get<std::string>(), a == "attacker_on");
    } else if (a == "note") {
      say_log("note: " + step.args.value("text", std::string{}));
    }
  } catch (const std::invalid_argument& e) {
    say_log("script: " + a + " refused: " + e.what());
  }
}

// ---- box ------------------------------------------------------------------

box::SubmitResult Simulation::submit(const box::BoxEvent& event) {
  if (event.kind == box::EventKind::LidOpened) lid_open_ = true;
  if (event.kind == box::EventKind::LidClosed) lid_open_ = false;
  deliver_box(event);
  const auto m = box_->machine();
  return {last_handled_, m.state};
}

void Simulation::deliver_box(const box::BoxEvent& event) {
  const auto d = box_->deliver(event, now_);
  last_handled_ = d.handled;
  std::string line = "box: " + std::string(to_string(event.kind));
  if (event.kind == box::EventKind::AcquireFailed) line += " (" + event.cause + ")";
  if (d.handled) {
    line += " " + std::string(to_string(d.before.state)) + " -> " + std::string(to_string(d.after.state));
  } else {
    line += " ignored in " + std::string(to_string(d.before.state));
  }
  say_log(line);
}

void Simulation::on_box_action(const box::Action& a, SimTime at) {
  switch (a.kind) {
    case box::ActionKind::StartAcquire:
      schedule(at + seconds(0.01), kBackendEntity, [this] {
        std::size_t bytes = 0;
        const net::Transport wired = [&](const net::Request& req) {
          if (!backend_online_) return net::Response{0, "", {}};
          auto resp = backend_router_.handle(req);
          bytes += resp.body.size();
          return resp;
        };
        const auto event = box_->acquire(wired);
        const auto done = now_ + airtime(bytes, scenario_.backend.wired_rate_bps);
        schedule(done, kBoxEntity, [this, event] { deliver_box(event); });
      });
      break;
    case box::ActionKind::StartNetwork:
      box_network_ = true;
      say_log("box: in-box network up");
      break;
    case box::ActionKind::StopNetwork:
      box_network_ = false;
      say_log("box: in-box network down");
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].node->network() == std::optional<std::string>(kBoxNetwork)) node_leave(i);
      }
      break;
    case box::ActionKind::RestartDeployTimer: {
      const auto gen = ++timer_generation_;
      schedule(at + box_->config().deploy_timeout, kBoxEntity, [this, gen] {
        if (gen == timer_generation_) deliver_box(box::BoxEvent::simple(box::EventKind::DeployTimeout));
      });
      break;
    }
    case box::ActionKind::CancelDeployTimer:
      ++timer_generation_;
      break;
    default:
      break;
  }
}

// ---- nodes ----------------------------------------------------------------

std::size_t Simulation::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].spec.id == id) return i;
  }
  throw std::invalid_argument("unknown node " + id);
}

void Simulation::place_node(const std::string& id) {
  const auto i = node_index(id);
  if (!lid_open_) throw std::invalid_argument("the lid is closed");
  auto& n = nodes_[i];
  if (n.inside) return;
  n.inside = true;
  n.in_field = false;
  say_log("node " + id + ": placed in the box");
  if (!n.powered) {
    boot_node(i);
  } else {
    schedule_scan(i, now_);
  }
}

void Simulation::remove_node(const std::string& id) {
  const auto i = node_index(id);
  if (!lid_open_) throw std::invalid_argument("the lid is closed");
  auto& n = nodes_[i];
  if (!n.inside) return;
  n.inside = false;
  n.node->leave();
  say_log("node " + id + ": removed from the box");
}

void Simulation::set_attacker_active(const std::string& name, bool active) {
  for (auto& e : eavesdroppers_) {
    if (e.name == name) {
      e.active = active;
      return;
    }
  }
  for (auto& r : rogues_) {
    if (r.spec.name != name) continue;
    r.spec.active = active;
    say_log("attacker " + name + (active ? ": on" : ": off"));
    if (!active) {
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].node->network() == std::optional<std::string>(name)) node_leave(i);
      }
    }
    return;
  }
  throw std::invalid_argument("unknown attacker " + name);
}

void Simulation::boot_node(std::size_t i) {
  auto& n = nodes_[i];
  n.powered = true;
  schedule_scan(i, now_ + seconds(n.spec.boot_delay_s));
}

void Simulation::schedule_scan(std::size_t i, SimTime at) {
  auto& n = nodes_[i];
  if (n.scanning) return;
  if (!unbounded_ && at > horizon_) return;
  n.scanning = true;
  schedule(at, node_entity(i), [this, i] { scan(i); });
}

void Simulation::node_leave(std::size_t i) {
  auto& n = nodes_[i];
  n.node->leave();
  if (n.inside && n.powered) schedule_scan(i, now_ + seconds(scenario_.scan_interval_s));
}

void Simulation::scan(std::size_t i) {
  auto& n = nodes_[i];
  n.scanning = false;
  const auto& node = *n.node;
  if (!n.powered || !n.inside || node.mode() != node::Mode::Bootloader || node.network()) return;
  if (node.phase() == node::Phase::Failed) return;

  std::vector<node::VisibleNetwork> visible;
  if (box_network_) visible.push_back({kBoxNetwork, box_->config().ssid, box_to_node(n).prx_dbm});
  for (const auto& r : rogues_) {
    if (r.spec.active) visible.push_back({r.spec.name, r.spec.ssid, rogue_to_node(r, n).prx_dbm});
  }
  const auto choice = node::scan_and_join(visible, node.defaults().ssid, node.config().rx_sensitivity_dbm);
  if (!choice) {
    schedule_scan(i, now_ + seconds(scenario_.scan_interval_s));
    return;
  }
  n.node->join(*choice);
  std::string line = "node " + n.spec.id + ": joined " + *choice;
  for (auto& r : rogues_) {
    if (r.spec.name == *choice) {
      r.joined_by.insert(n.spec.id);
      n.joined_rogue = r.spec.name;
    }
  }
  say_log(line);
  node_send(i);
}

void Simulation::node_send(std::size_t i) {
  auto& n = nodes_[i];
  auto req = n.node->next_request();
  if (!req) return;
  const auto network = *n.node->network();
  req->peer = n.node->mac().str();
  const auto wire = request_wire(*req);

  Frame f;
  f.at = now_;
  f.link = LinkKind::NodeUplink;
  f.from = n.spec.id;
  f.to = network;
  f.ptx_dbm = n.spec.config.ptx_dbm;
  f.gtx_db = n.spec.config.gain_db;
  f.bytes = wire;

  radio::ReceptionVerdict v;
  double rate = scenario_.box.channel.data_rate_bps;
  std::uint64_t ap_entity = kBoxEntity;
  if (network == kBoxNetwork) {
    v = node_to_box(n);
    f.channel = scenario_.box.channel;
    if (!box_network_) v.decodable = false;
  } else {
    std::size_t r = 0;
    while (r < rogues_.size() && rogues_[r].spec.name != network) ++r;
    if (r == rogues_.size() || !rogues_[r].spec.active) {
      v.decodable = false;
    } else {
      v = node_to_rogue(n, rogues_[r]);
    }
    rate = r < rogues_.size() ? rogues_[r].spec.rate_bps : rate;
    f.channel = {scenario_.box.channel.bandwidth_hz, rate, scenario_.box.channel.temperature_k};
    ap_entity = kRogueEntityBase + r;
  }
  tap(f, n.inside);
  ++n.exchanges;

  const auto up = airtime(wire.size(), rate);
  const auto sent = now_;
  if (!v.decodable) {
    schedule(now_ + up + seconds(scenario_.frame_timeout_s), node_entity(i), [this, i] { node_timeout(i); });
    return;
  }
  schedule(now_ + up, ap_entity, [this, i, network, req = std::move(*req), sent, size = wire.size()] {
    node_reply(i, network, req, sent, size);
  });
}

void Simulation::node_reply(std::size_t i, const std::string& network, net::Request req, SimTime sent,
                            std::size_t up_bytes) {
  auto& n = nodes_[i];
  Frame f;
  f.at = now_;
  f.from = network;
  f.to = n.spec.id;
  radio::ReceptionVerdict v;
  double rate = 0;
  net::Response resp;
  bool transmitter_inside = true;

  if (network == kBoxNetwork) {
    if (!box_network_) {
      schedule(now_ + seconds(scenario_.frame_timeout_s), node_entity(i), [this, i] { node_timeout(i); });
      return;
    }
    resp = box_->handle_ota(req, now_);
    f.link = LinkKind::BoxDownlink;
    f.ptx_dbm = box_radio_.antenna_ptx_dbm;
    f.gtx_db = scenario_.box.gain_db;
    f.channel = scenario_.box.channel;
    rate = scenario_.box.channel.data_rate_bps;
    v = box_to_node(n);
  } else {
    std::size_t r = 0;
    while (r < rogues_.size() && rogues_[r].spec.name != network) ++r;
    if (r == rogues_.size() || !rogues_[r].spec.active) {
      schedule(now_ + seconds(scenario_.frame_timeout_s), node_entity(i), [this, i] { node_timeout(i); });
      return;
    }
    auto& rogue = rogues_[r];
    resp = rogue.server->handle(req);
    f.link = LinkKind::RogueDownlink;
    f.ptx_dbm = rogue.spec.ptx_dbm;
    f.gtx_db = rogue.spec.gtx_db;
    rate = rogue.spec.rate_bps;
    f.channel = {scenario_.box.channel.bandwidth_hz, rate, scenario_.box.channel.temperature_k};
    v = rogue_to_node(rogue, n);
    transmitter_inside = false;
  }
  f.bytes = response_wire(resp);
  if (transmitter_inside) tap(f, true);

  const auto down = airtime(f.bytes.size(), rate);
  if (!v.decodable) {
    schedule(now_ + down + seconds(scenario_.frame_timeout_s), node_entity(i), [this, i] { node_timeout(i); });
    return;
  }
  const auto total = up_bytes + f.bytes.size();
  schedule(now_ + down, node_entity(i), [this, i, resp = std::move(resp), sent, total] {
    node_receive(i, resp, sent, total);
  });
}

void Simulation::node_receive(std::size_t i, const net::Response& resp, SimTime sent, std::size_t bytes) {
  auto& n = nodes_[i];
  exchanges_.push_back({n.spec.id, sent, now_, bytes});
  const auto before = n.node->phase();
  const auto p = n.node->on_response(resp);
  if (n.node->phase() != before) {
    say_log("node " + n.spec.id + ": " + std::string(to_string(before)) + " -> " +
            std::string(to_string(n.node->phase())) + " (" + std::to_string(resp.status) + ")");
  }
  node_progress(i, p);
}

void Simulation::node_timeout(std::size_t i) {
  auto& n = nodes_[i];
  if (!n.node->network()) return;
  node_progress(i, n.node->on_timeout());
}

void Simulation::node_progress(std::size_t i, node::Progress p) {
  switch (p) {
    case node::Progress::Advanced:
      schedule(now_, node_entity(i), [this, i] { node_send(i); });
      break;
    case node::Progress::RetryLater:
      schedule(now_ + seconds(scenario_.retry_interval_s), node_entity(i), [this, i] { node_send(i); });
      break;
    case node::Progress::Done:
      say_log("node " + nodes_[i].spec.id + ": running runtime image " + nodes_[i].node->runtime_image_name());
      break;
    case node::Progress::GaveUp:
      say_log("node " + nodes_[i].spec.id + ": gave up in phase " + std::string(to_string(nodes_[i].node->phase())));
      break;
  }
}

// ---- spectrum monitor -----------------------------------------------------

void Simulation::schedule_monitor(SimTime at) {
  if (!unbounded_ && at > horizon_) return;
  schedule(at, kMonitorEntity, [this] { monitor(); });
}

void Simulation::monitor() {
  std::vector<box::ObservedNetwork> seen;
  const auto& cfg = box_->config();
  if (box_network_) seen.push_back({cfg.ssid, cfg.channel, cfg.bssid, 0.0});
  for (const auto& r : rogues_) {
    if (!r.spec.active) continue;
    radio::LinkBudget b;
    b.ptx_dbm = r.spec.ptx_dbm;
    b.gtx_db = r.spec.gtx_db;
    b.grx_db = scenario_.box.gain_db;
    b.lbox_db = lbox_between(false, true);
    b.distance_cm = r.spec.distance_cm;
    b.freq_mhz = scenario_.box.freq_mhz;
    const double prx = radio::received_power_dbm(b);
    if (prx >= scenario_.box.rx_sensitivity_dbm) seen.push_back({r.spec.ssid, r.spec.channel, r.spec.bssid, prx});
  }
  for (const auto& e : box_->monitor_spectrum(seen, now_)) {
    say_log("box: foreign network " + e.ssid + " on channel " + std::to_string(e.channel));
  }
  schedule_monitor(now_ + seconds(scenario_.monitor_interval_s));
}

// ---- field phase ----------------------------------------------------------

void Simulation::deploy_field() {
  for (auto& n : nodes_) {
    if (n.inside || !n.powered) continue;
    n.in_field = true;
    n.node->reboot();
  }
  say_log("field: nodes deployed");
}

void Simulation::send_readings(std::size_t count) {
  for (auto& n : nodes_) {
    if (!n.in_field || n.node->mode() != node::Mode::Runtime || !n.node->key()) continue;
    for (std::size_t k = 0; k < count; ++k) {
      char payload[96];
      std::snprintf(payload, sizeof payload, "reading node=%s seq=%zu t=%.3f temp=21.5C", n.spec.id.c_str(),
                    ++readings_total_, to_seconds(now_));
      auto req = n.node->make_reading(to_bytes(payload));
      ++n.readings_sent;

      Frame f;
      f.at = now_;
      f.link = LinkKind::Field;
      f.from = n.spec.id;
      f.to = "gateway";
      f.ptx_dbm = n.spec.config.ptx_dbm;
      f.gtx_db = n.spec.config.gain_db;
      f.channel = {scenario_.box.channel.bandwidth_hz, scenario_.field.rate_bps, scenario_.box.channel.temperature_k};
      f.bytes = request_wire(req);
      tap(f, false);

      radio::LinkBudget b;
      b.ptx_dbm = f.ptx_dbm;
      b.gtx_db = f.gtx_db;
      b.grx_db = scenario_.field.gateway_gain_db;
      b.distance_cm = n.spec.field_distance_cm;
      b.freq_mhz = scenario_.box.freq_mhz;
      const auto v = radio::reception_verdict(b, f.channel, scenario_.field.gateway_sensitivity_dbm);
      std::string result;
      if (!v.decodable) {
        result = "lost";
      } else if (!backend_online_) {
        result = "backend offline";
      } else {
        const auto resp = backend_router_.handle(req);
        result = std::to_string(resp.status) + " " + resp.body_string();
        if (resp.status == 200) {
          ++n.readings_accepted;
        } else {
          ++n.readings_rejected;
        }
      }
      n.reading_results.push_back(result);
      say_log("node " + n.spec.id + ": reading -> " + result);
    }
  }
}

void Simulation::replay_reading(const std::string& id) {
  auto& n = nodes_[node_index(id)];
  const auto& last = n.node->last_sealed();
  if (!last || !backend_online_) return;
  auto req = net::make_request("POST", "/readings", *last);
  const auto resp = backend_router_.handle(req);
  const auto result = std::to_string(resp.status) + " " + resp.body_string();
  n.reading_results.push_back("replay " + result);
  if (resp.status == 200) ++n.readings_accepted;
  say_log("node " + id + ": replayed reading -> " + result);
}

// ---- radio ----------------------------------------------------------------

double Simulation::lbox_between(bool a_inside, bool b_inside) const {
  return a_inside != b_inside && !lid_open_ ? scenario_.box.shielding_db : 0.0;
}

radio::ReceptionVerdict Simulation::box_to_node(const NodeEntity& n) const {
  radio::LinkBudget b;
  b.ptx_dbm = box_radio_.antenna_ptx_dbm;
  b.gtx_db = scenario_.box.gain_db;
  b.grx_db = n.spec.config.gain_db;
  b.lbox_db = lbox_between(true, n.inside);
  b.distance_cm = n.spec.distance_cm;
  b.freq_mhz = scenario_.box.freq_mhz;
  return radio::reception_verdict(b, scenario_.box.channel, n.spec.config.rx_sensitivity_dbm);
}

radio::ReceptionVerdict Simulation::node_to_box(const NodeEntity& n) const {
  radio::LinkBudget b;
  b.ptx_dbm = n.spec.config.ptx_dbm;
  b.gtx_db = n.spec.config.gain_db;
  b.grx_db = scenario_.box.gain_db;
  b.lbox_db = lbox_between(n.inside, true);
  b.distance_cm = n.spec.distance_cm;
  b.freq_mhz = scenario_.box.freq_mhz;
  return radio::reception_verdict(b, scenario_.box.channel, scenario_.box.rx_sensitivity_dbm);
}

radio::ReceptionVerdict Simulation::rogue_to_node(const RogueEntity& r, const NodeEntity& n) const {
  radio::LinkBudget b;
  b.ptx_dbm = r.spec.ptx_dbm;
  b.gtx_db = r.spec.gtx_db;
  b.grx_db = n.spec.config.gain_db;
  b.lbox_db = lbox_between(false, n.inside);
  b.distance_cm = r.spec.distance_cm;
  b.freq_mhz = scenario_.box.freq_mhz;
  const radio::ChannelParams ch{scenario_.box.channel.bandwidth_hz, r.spec.rate_bps,
                                scenario_.box.channel.temperature_k};
  return radio::reception_verdict(b, ch, n.spec.config.rx_sensitivity_dbm);
}

radio::ReceptionVerdict Simulation::node_to_rogue(const NodeEntity& n, const RogueEntity& r) const {
  radio::LinkBudget b;
  b.ptx_dbm = n.spec.config.ptx_dbm;
  b.gtx_db = n.spec.config.gain_db;
  b.grx_db = r.spec.grx_db;
  b.lbox_db = lbox_between(n.inside, false);
  b.distance_cm = r.spec.distance_cm;
  b.freq_mhz = scenario_.box.freq_mhz;
  const radio::ChannelParams ch{scenario_.box.channel.bandwidth_hz, r.spec.rate_bps,
                                scenario_.box.channel.temperature_k};
  return radio::reception_verdict(b, ch, r.spec.sensitivity_dbm);
}

void Simulation::tap(Frame frame, bool transmitter_inside) {
  for (const auto& e : eavesdroppers_) {
    if (!e.active) continue;
    if (frame.link == LinkKind::Field) {
      frame.distance_to_listener_cm = e.field_distance_cm;
      frame.lbox_db = 0;
    } else {
      frame.distance_to_listener_cm = e.distance_cm;
      frame.lbox_db = lbox_between(transmitter_inside, false);
    }
    const Listener l{e.name, e.grx_db, e.sensitivity_dbm, scenario_.box.freq_mhz};
    eavesdrop_[e.name].add(tap_channel(frame, l));
  }
}

std::vector<crypto::SecretKey> Simulation::issued_keys() const {
  std::vector<crypto::SecretKey> keys;
  for (const auto& r : backend_->records()) {
    if (r.state != backend::KeyState::Fresh) keys.push_back(r.key);
  }
  return keys;
}

}  // namespace faraday::sim
