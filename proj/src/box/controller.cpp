#include <sodium.h>

#include <algorithm>

#include "faraday/box_controller.hpp"
#include "faraday/keyfile.hpp"

namespace faraday::box {

Hsm Hsm::generate(crypto::RandomSource& rng) {
  return Hsm{crypto::SigningKeyPair::generate(rng), crypto::generate_key(rng)};
}

bool is_operator_event(EventKind k) {
  switch (k) {
    case EventKind::PowerOn:
    case EventKind::LidOpened:
    case EventKind::LidClosed:
    case EventKind::PressAcquire:
    case EventKind::PressDeploy:
      return true;
    default:
      return false;
  }
}

BoxController::BoxController(BoxConfig config, Hsm hsm, crypto::RandomSource& rng)
    : config_(std::move(config)), hsm_(std::move(hsm)), rng_(rng) {
  inventory_.key_threshold = config_.key_threshold;
  session_.timeout = config_.deploy_timeout;
}

void BoxController::set_action_sink(ActionSink sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

Delivery BoxController::deliver(const BoxEvent& event, SimTime now) {
  std::lock_guard lock(mu_);
  return deliver_locked(event, now);
}

Delivery BoxController::deliver_locked(const BoxEvent& event, SimTime now) {
  Delivery out;
  out.before = machine_;
  auto t = step(machine_, event, inventory_, session_);
  out.handled = t.handled;
  machine_ = t.next;
  for (const auto& a : t.actions) execute(a, now, out);
  out.after = machine_;
  return out;
}

void BoxController::say(const Utterance& u, SimTime now) {
  transcript_.push_back({transcript_.size() + 1, now, u.id, u.text});
}

void BoxController::execute(const Action& a, SimTime now, Delivery& out) {
  if (is_external(a.kind)) {
    if (a.kind == ActionKind::StartNetwork) network_active_ = true;
    if (a.kind == ActionKind::StopNetwork) network_active_ = false;
    out.external.push_back(a);
    if (sink_) sink_(a, now);
    return;
  }
  switch (a.kind) {
    case ActionKind::Say:
      say(*a.utterance, now);
      break;
    case ActionKind::CommitAcquired:
      commit_acquired();
      break;
    case ActionKind::DiscardAcquired:
      inventory_.staged.reset();
      break;
    case ActionKind::StartSession:
      session_ = DeploySession{};
      session_.started_at = now;
      session_.timeout = config_.deploy_timeout;
      session_started_ = true;
      break;
    case ActionKind::ServeOta:
      out.reply = serve_ota_locked(a.event, now);
      break;
    case ActionKind::RecordErasure:
      record_erasure(a.event);
      break;
    case ActionKind::EraseKeys:
      erase_keys();
      break;
    default:
      break;
  }
}

void BoxController::commit_acquired() {
  if (!inventory_.staged) return;
  auto staged = std::move(*inventory_.staged);
  inventory_.staged.reset();
  for (auto& img : staged.images) {
    auto it = std::find_if(inventory_.images.begin(), inventory_.images.end(),
                           [&](const auto& have) { return have.name == img.name; });
    if (it != inventory_.images.end()) {
      *it = std::move(img);
    } else {
      inventory_.images.push_back(std::move(img));
    }
  }
  for (auto& k : staged.keys) {
    if (std::find(inventory_.keys.begin(), inventory_.keys.end(), k) != inventory_.keys.end()) continue;
    inventory_.keys.push_back(std::move(k));
    ++inventory_.keys_acquired;
  }
}

void BoxController::erase_keys() {
  inventory_.keys_erased += inventory_.keys.size();
  inventory_.keys.clear();
  inventory_.staged.reset();
  // Served images hold spent keys; drop the retry cache with the rest.
  for (auto& [mac, p] : session_.served_macs) {
    sodium_memzero(p.runtime_container.data(), p.runtime_container.size());
    p.runtime_container.clear();
  }
}

void BoxController::record_erasure(const BoxEvent& event) {
  auto it = session_.served_macs.find(event.mac);
  if (it == session_.served_macs.end()) return;
  auto& p = it->second;
  if (p.stage != MacStage::ChallengeIssued) return;
  p.stage = event.ok ? MacStage::Erased : MacStage::ErasureFailed;
  p.challenge.reset();
}

net::Response BoxController::serve_ota_locked(const BoxEvent& event, SimTime now) {
  if (event.stage == OtaStage::Bootloader) {
    auto [it, inserted] = session_.served_macs.try_emplace(event.mac);
    ++it->second.requests;
    return serve_bootloader(it->second);
  }
  auto it = session_.served_macs.find(event.mac);
  if (it == session_.served_macs.end()) return net::Response::text(409, "bootloader update required first");
  auto& p = it->second;
  ++p.requests;
  if (event.stage == OtaStage::ErasureChallenge) return serve_challenge(p);
  return serve_runtime(p, event.image, now);
}

net::Response BoxController::serve_bootloader(MacProgress&) {
  if (session_.bootloader_container.empty()) {
    const auto* base = inventory_.bootloader_base();
    if (!base) return net::Response::text(503, "no bootloader image");
    auto stage = firmware::make_bootloader_stage(base->name, base->bytes, hsm_.signing.verifying_key());
    session_.bootloader_container = firmware::encode_container(firmware::sign_image(std::move(stage), hsm_.signing));
  }
  return net::Response::ok(session_.bootloader_container);
}

net::Response BoxController::serve_challenge(MacProgress& p) {
  switch (p.stage) {
    case MacStage::ErasureFailed:
      return net::Response::text(403, "erasure failed");
    case MacStage::RuntimeFlashed:
      return net::Response::text(409, "already provisioned");
    default:
      break;
  }
  p.challenge = erasure::erasure_challenge(rng_, config_.erasure_memory_bytes);
  p.stage = MacStage::ChallengeIssued;
  return net::Response::ok(Bytes(p.challenge->begin(), p.challenge->end()));
}

net::Response BoxController::serve_runtime(MacProgress& p, const std::string& requested, SimTime now) {
  const std::string name = !requested.empty()               ? requested
                           : !config_.runtime_images.empty() ? config_.runtime_images.front()
                                                             : std::string{};
  if (p.stage == MacStage::RuntimeFlashed) {
    if (name != p.image) return net::Response::text(409, "already provisioned with " + p.image);
    return net::Response::ok(p.runtime_container);
  }
  if (p.stage != MacStage::Erased) return net::Response::text(403, "secure erasure required first");
  const auto* templ = inventory_.find_image(name);
  if (!templ || templ->kind != firmware::ImageKind::RuntimeTemplate) {
    return net::Response::text(404, "unknown runtime image");
  }
  if (inventory_.keys.empty()) {
    if (!session_.out_of_keys_announced) {
      session_.out_of_keys_announced = true;
      say(say::out_of_keys(), now);
    }
    return net::Response::text(503, "out of keys");
  }
  // The key leaves the store the moment it is patched in.
  const crypto::SecretKey key = std::move(inventory_.keys.front());
  inventory_.keys.pop_front();
  ++inventory_.keys_spent;
  auto image = firmware::sign_image(firmware::patch_image(*templ, key), hsm_.signing);
  p.runtime_container = firmware::encode_container(image);
  p.image = name;
  p.stage = MacStage::RuntimeFlashed;
  return net::Response::ok(p.runtime_container);
}

net::Response BoxController::handle_ota(const net::Request& req, SimTime now) {
  MacAddress mac;
  try {
    mac = MacAddress::parse(req.peer);
  } catch (const DecodeError&) {
    return net::Response::text(400, "unknown sender");
  }
  const auto& paths = config_.paths;

  std::lock_guard lock(mu_);
  if (!machine_.serving()) return net::Response::text(503, "not serving");

  BoxEvent event;
  if (req.path == paths.bootloader && req.method == "GET") {
    event = BoxEvent::ota(mac, OtaStage::Bootloader);
  } else if (req.path == paths.runtime && req.method == "GET") {
    event = BoxEvent::ota(mac, OtaStage::Runtime, req.param("image").value_or(""));
  } else if (req.path == paths.erasure && req.method == "POST") {
    if (req.body.empty()) {
      event = BoxEvent::ota(mac, OtaStage::ErasureChallenge);
    } else {
      auto it = session_.served_macs.find(mac);
      if (it == session_.served_macs.end() || it->second.stage != MacStage::ChallengeIssued) {
        return net::Response::text(409, "no challenge outstanding");
      }
      const auto& seed = *it->second.challenge;
      bool ok = false;
      try {
        const auto proof = erasure::ErasureProof::decode(req.body);
        ok = proof.challenge_seed == seed && erasure::erasure_verify(proof, seed, config_.erasure_memory_bytes);
      } catch (const DecodeError&) {
        ok = false;
      }
      auto d = deliver_locked(BoxEvent::erasure(mac, ok), now);
      if (!d.handled) return net::Response::text(503, "not serving");
      return ok ? net::Response::text(200, "erasure verified") : net::Response::text(403, "erasure proof rejected");
    }
  } else {
    return net::Response::text(404, "not found");
  }

  auto d = deliver_locked(event, now);
  if (!d.reply) return net::Response::text(503, "not serving");
  return *d.reply;
}

net::Transport BoxController::ota_transport(std::function<SimTime()> clock) {
  return [this, clock = std::move(clock)](const net::Request& req) { return handle_ota(req, clock()); };
}

BoxEvent BoxController::acquire(const net::Transport& backend) {
  Acquisition acq;
  std::vector<std::string> names;
  names.push_back(config_.bootloader_image);
  names.insert(names.end(), config_.runtime_images.begin(), config_.runtime_images.end());
  try {
    for (const auto& name : names) {
      auto resp = backend(net::make_request("GET", "/firmware/" + name));
      if (resp.status == 0) return BoxEvent::acquire_failed("the backend is unreachable");
      if (resp.status == 404) return BoxEvent::acquire_failed("the backend has no image named " + name);
      if (resp.status != 200) return BoxEvent::acquire_failed("image download failed");
      auto img = firmware::decode_container(resp.body, name);
      firmware::validate_image(img);
      acq.images.push_back(std::move(img));
    }
    auto req = net::make_request("GET", "/keys?count=" + std::to_string(config_.acquire_key_count));
    req.headers["X-Box-Token"] = config_.box_token;
    auto resp = backend(req);
    switch (resp.status) {
      case 200:
        break;
      case 0:
        return BoxEvent::acquire_failed("the backend is unreachable");
      case 401:
        return BoxEvent::acquire_failed("the backend rejected the box credentials");
      case 409: {
        const auto body = resp.body_string();
        const auto pos = body.find("deficit=");
        const auto deficit = pos == std::string::npos ? std::string("?") : body.substr(pos + 8);
        return BoxEvent::acquire_failed("the backend is short of keys by " + deficit);
      }
      default:
        return BoxEvent::acquire_failed("key download failed");
    }
    for (auto& e : keyfile::decode(resp.body)) acq.keys.push_back(std::move(e.key));
  } catch (const std::exception& e) {
    return BoxEvent::acquire_failed(std::string("malformed backend data (") + e.what() + ")");
  }
  std::lock_guard lock(mu_);
  inventory_.staged = std::move(acq);
  return BoxEvent::simple(EventKind::AcquireCompleted);
}

std::vector<BoxEvent> BoxController::monitor_spectrum(const std::vector<ObservedNetwork>& networks, SimTime now) {
  std::lock_guard lock(mu_);
  std::vector<BoxEvent> fired;
  if (!machine_.powered) return fired;
  for (const auto& n : networks) {
    if (n.ssid != config_.ssid || n.channel != config_.channel) continue;
    if (n.bssid == config_.bssid && network_active_) continue;
    if (!warned_bssids_.insert(n.bssid).second) continue;
    auto e = BoxEvent::rogue(n.ssid, n.channel);
    deliver_locked(e, now);
    fired.push_back(std::move(e));
  }
  return fired;
}

MachineState BoxController::machine() const {
  std::lock_guard lock(mu_);
  return machine_;
}

bool BoxController::network_active() const {
  std::lock_guard lock(mu_);
  return network_active_;
}

InventoryCounts BoxController::counts() const {
  std::lock_guard lock(mu_);
  InventoryCounts c;
  c.keys = inventory_.keys.size();
  c.threshold = inventory_.key_threshold;
  c.acquired = inventory_.keys_acquired;
  c.spent = inventory_.keys_spent;
  c.erased = inventory_.keys_erased;
  for (const auto& img : inventory_.images) {
    if (img.kind == firmware::ImageKind::RuntimeTemplate) c.templates.push_back(img.name);
    if (img.kind == firmware::ImageKind::BootloaderStage) c.has_bootloader = true;
  }
  return c;
}

SessionView BoxController::session() const {
  std::lock_guard lock(mu_);
  SessionView v;
  v.started = session_started_;
  v.started_at = session_.started_at;
  v.timeout = session_.timeout;
  for (const auto& [mac, p] : session_.served_macs) v.macs.push_back({mac, p.stage, p.image, p.requests});
  v.runtime_flashed = session_.runtime_flashed();
  v.erasure_failed = session_.erasure_failed();
  v.out_of_keys = session_.out_of_keys_announced;
  return v;
}

std::vector<SpeakerEntry> BoxController::transcript(std::uint64_t since) const {
  std::lock_guard lock(mu_);
  std::vector<SpeakerEntry> out;
  for (const auto& e : transcript_) {
    if (e.seq > since) out.push_back(e);
  }
  return out;
}

BoxInventory BoxController::inventory_copy() const {
  std::lock_guard lock(mu_);
  return inventory_;
}

}  // namespace faraday::box
