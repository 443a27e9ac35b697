#include <json.hpp>

#include <cstdio>

#include "faraday/box.hpp"

namespace faraday::box {

namespace {

template <typename E, std::size_t N>
E from_table(std::string_view s, const std::array<E, N>& values, std::string_view what) {
  for (auto v : values) {
    if (to_string(v) == s) return v;
  }
  throw DecodeError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array kAllStates{BoxState::BoxOpen_NoFW, BoxState::BoxOpen_FW, BoxState::BoxClosed_NoFW,
                                BoxState::BoxClosed_FW, BoxState::Deploy_FW};
constexpr std::array kAllStages{OtaStage::Bootloader, OtaStage::ErasureChallenge, OtaStage::Runtime};
constexpr std::array kAllKinds{EventKind::PowerOn,        EventKind::LidOpened,       EventKind::LidClosed,
                               EventKind::PressAcquire,   EventKind::PressDeploy,     EventKind::OtaRequest,
                               EventKind::ErasureResult,  EventKind::DeployTimeout,   EventKind::RogueDetected,
                               EventKind::AcquireCompleted, EventKind::AcquireFailed};

}  // namespace

std::string_view to_string(BoxState s) {
  switch (s) {
    case BoxState::BoxOpen_NoFW: return "BoxOpen_NoFW";
    case BoxState::BoxOpen_FW: return "BoxOpen_FW";
    case BoxState::BoxClosed_NoFW: return "BoxClosed_NoFW";
    case BoxState::BoxClosed_FW: return "BoxClosed_FW";
    case BoxState::Deploy_FW: return "Deploy_FW";
  }
  return "?";
}

BoxState box_state_from_string(std::string_view s) { return from_table(s, kAllStates, "box state"); }

bool lid_open(BoxState s) { return s == BoxState::BoxOpen_NoFW || s == BoxState::BoxOpen_FW; }

std::string MacAddress::str() const {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2], octets[3],
                octets[4], octets[5]);
  return buf;
}

MacAddress MacAddress::parse(std::string_view s) {
  if (s.size() != 17) throw DecodeError("bad MAC address '" + std::string(s) + "'");
  std::string hex;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i % 3 == 2) {
      if (s[i] != ':') throw DecodeError("bad MAC address '" + std::string(s) + "'");
    } else {
      hex.push_back(s[i]);
    }
  }
  const auto raw = from_hex(hex);
  MacAddress m;
  std::copy(raw.begin(), raw.end(), m.octets.begin());
  return m;
}

std::string_view to_string(OtaStage s) {
  switch (s) {
    case OtaStage::Bootloader: return "bootloader";
    case OtaStage::ErasureChallenge: return "erasure";
    case OtaStage::Runtime: return "runtime";
  }
  return "?";
}

OtaStage ota_stage_from_string(std::string_view s) { return from_table(s, kAllStages, "OTA stage"); }

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::PowerOn: return "PowerOn";
    case EventKind::LidOpened: return "LidOpened";
    case EventKind::LidClosed: return "LidClosed";
    case EventKind::PressAcquire: return "PressAcquire";
    case EventKind::PressDeploy: return "PressDeploy";
    case EventKind::OtaRequest: return "OtaRequest";
    case EventKind::ErasureResult: return "ErasureResult";
    case EventKind::DeployTimeout: return "DeployTimeout";
    case EventKind::RogueDetected: return "RogueDetected";
    case EventKind::AcquireCompleted: return "AcquireCompleted";
    case EventKind::AcquireFailed: return "AcquireFailed";
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view s) { return from_table(s, kAllKinds, "event kind"); }

std::string_view to_string(MacStage s) {
  switch (s) {
    case MacStage::BootloaderServed: return "bootloader-updated";
    case MacStage::ChallengeIssued: return "erasure-challenged";
    case MacStage::Erased: return "erased";
    case MacStage::ErasureFailed: return "erasure-failed";
    case MacStage::RuntimeFlashed: return "runtime-flashed";
  }
  return "?";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Say: return "Say";
    case ActionKind::StartAcquire: return "StartAcquire";
    case ActionKind::CommitAcquired: return "CommitAcquired";
    case ActionKind::DiscardAcquired: return "DiscardAcquired";
    case ActionKind::StartSession: return "StartSession";
    case ActionKind::StartNetwork: return "StartNetwork";
    case ActionKind::StopNetwork: return "StopNetwork";
    case ActionKind::RestartDeployTimer: return "RestartDeployTimer";
    case ActionKind::CancelDeployTimer: return "CancelDeployTimer";
    case ActionKind::ServeOta: return "ServeOta";
    case ActionKind::RecordErasure: return "RecordErasure";
    case ActionKind::EraseKeys: return "EraseKeys";
  }
  return "?";
}

BoxEvent BoxEvent::ota(MacAddress mac, OtaStage stage, std::string image) {
  BoxEvent e = simple(EventKind::OtaRequest);
  e.mac = mac;
  e.stage = stage;
  e.image = std::move(image);
  return e;
}

BoxEvent BoxEvent::erasure(MacAddress mac, bool ok) {
  BoxEvent e = simple(EventKind::ErasureResult);
  e.mac = mac;
  e.ok = ok;
  return e;
}

BoxEvent BoxEvent::rogue(std::string ssid, int channel) {
  BoxEvent e = simple(EventKind::RogueDetected);
  e.ssid = std::move(ssid);
  e.channel = channel;
  return e;
}

BoxEvent BoxEvent::acquire_failed(std::string cause) {
  BoxEvent e = simple(EventKind::AcquireFailed);
  e.cause = std::move(cause);
  return e;
}

std::string BoxEvent::to_json() const {
  nlohmann::ordered_json j{{"kind", to_string(kind)}};
  switch (kind) {
    case EventKind::OtaRequest:
      j["mac"] = mac.str();
      j["stage"] = to_string(stage);
      if (!image.empty()) j["image"] = image;
      break;
    case EventKind::ErasureResult:
      j["mac"] = mac.str();
      j["ok"] = ok;
      break;
    case EventKind::RogueDetected:
      j["ssid"] = ssid;
      j["channel"] = channel;
      break;
    case EventKind::AcquireFailed:
      j["cause"] = cause;
      break;
    default:
      break;
  }
  return j.dump();
}

BoxEvent BoxEvent::from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("event is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) throw DecodeError("event needs a kind");
  auto e = BoxEvent::simple(event_kind_from_string(j["kind"].get<std::string>()));
  try {
    if (j.contains("mac")) e.mac = MacAddress::parse(j["mac"].get<std::string>());
    if (j.contains("stage")) e.stage = ota_stage_from_string(j["stage"].get<std::string>());
    e.image = j.value("image", "");
    e.ok = j.value("ok", false);
    e.ssid = j.value("ssid", "");
    e.channel = j.value("channel", 0);
    e.cause = j.value("cause", "");
  } catch (const nlohmann::json::exception& ex) {
    throw DecodeError(std::string("bad event field: ") + ex.what());
  }
  if ((e.kind == EventKind::OtaRequest || e.kind == EventKind::ErasureResult) && !j.contains("mac")) {
    throw DecodeError(std::string(to_string(e.kind)) + " needs a mac");
  }
  return e;
}

bool BoxInventory::has_runtime_template() const {
  for (const auto& img : images) {
    if (img.kind == firmware::ImageKind::RuntimeTemplate) return true;
  }
  return false;
}

bool BoxInventory::stocked() const { return has_runtime_template() && keys.size() > key_threshold; }

bool BoxInventory::stocked_after_commit() const {
  if (!staged) return stocked();
  bool has_template = has_runtime_template();
  for (const auto& img : staged->images) has_template |= img.kind == firmware::ImageKind::RuntimeTemplate;
  return has_template && keys.size() + staged->keys.size() > key_threshold;
}

const firmware::FirmwareImage* BoxInventory::find_image(std::string_view name) const {
  for (const auto& img : images) {
    if (img.name == name) return &img;
  }
  return nullptr;
}

const firmware::FirmwareImage* BoxInventory::bootloader_base() const {
  for (const auto& img : images) {
    if (img.kind == firmware::ImageKind::BootloaderStage) return &img;
  }
  return nullptr;
}

std::size_t DeploySession::runtime_flashed() const {
  std::size_t n = 0;
  for (const auto& [mac, p] : served_macs) n += p.stage == MacStage::RuntimeFlashed;
  return n;
}

std::size_t DeploySession::erasure_failed() const {
  std::size_t n = 0;
  for (const auto& [mac, p] : served_macs) n += p.stage == MacStage::ErasureFailed;
  return n;
}

namespace {

Action say_action(Utterance u) { return Action{ActionKind::Say, std::move(u), {}}; }
Action act(ActionKind k) { return Action{k, std::nullopt, {}}; }
Action act(ActionKind k, const BoxEvent& e) { return Action{k, std::nullopt, e}; }

Transition ignored(const MachineState& m) { return Transition{m, {}, false}; }

// Completion of a wired acquisition can land in any powered state; only
// non-deploying states re-evaluate their firmware flag.
Transition on_acquire_result(const MachineState& m, const BoxEvent& e, const BoxInventory& inv) {
  if (!m.acquire_pending) return ignored(m);
  Transition t{m, {}};
  t.next.acquire_pending = false;
  if (e.kind == EventKind::AcquireFailed) {
    t.actions.push_back(act(ActionKind::DiscardAcquired));
    t.actions.push_back(say_action(say::acquire_failed(e.cause)));
    return t;
  }
  t.actions.push_back(act(ActionKind::CommitAcquired));
  const bool stocked = inv.stocked_after_commit();
  const std::size_t keys = inv.keys.size() + (inv.staged ? inv.staged->keys.size() : 0);
  switch (m.state) {
    case BoxState::BoxOpen_NoFW:
    case BoxState::BoxOpen_FW:
      t.next.state = stocked ? BoxState::BoxOpen_FW : BoxState::BoxOpen_NoFW;
      break;
    case BoxState::BoxClosed_NoFW:
    case BoxState::BoxClosed_FW:
      t.next.state = stocked ? BoxState::BoxClosed_FW : BoxState::BoxClosed_NoFW;
      break;
    case BoxState::Deploy_FW:
      break;
  }
  if (t.next.state == BoxState::BoxOpen_NoFW) t.next.deploy_armed = false;
  t.actions.push_back(say_action(stocked ? say::acquire_done(keys)
                                         : say::acquire_insufficient(keys, inv.key_threshold)));
  return t;
}

}  // namespace

Transition step(const MachineState& m, const BoxEvent& e, const BoxInventory& inv, const DeploySession& session) {
  if (!m.powered) {
    if (e.kind != EventKind::PowerOn) return ignored(m);
    Transition t{m, {}};
    t.next = MachineState{};
    t.next.powered = true;
    const bool stocked = inv.stocked();
    t.next.state = stocked ? BoxState::BoxOpen_FW : BoxState::BoxOpen_NoFW;
    t.actions.push_back(say_action(say::ready(stocked)));
    return t;
  }

  switch (e.kind) {
    case EventKind::PowerOn:
      return ignored(m);
    case EventKind::RogueDetected: {
      Transition t{m, {}};
      t.actions.push_back(say_action(say::rogue_warning(e.ssid, e.channel)));
      return t;
    }
    case EventKind::AcquireCompleted:
    case EventKind::AcquireFailed:
      return on_acquire_result(m, e, inv);
    default:
      break;
  }

  Transition t{m, {}};
  auto& n = t.next;
  switch (m.state) {
    case BoxState::BoxOpen_NoFW:
    case BoxState::BoxOpen_FW: {
      const bool has_fw = m.state == BoxState::BoxOpen_FW;
      switch (e.kind) {
        case EventKind::PressAcquire:
          if (m.acquire_pending) return ignored(m);
          n.acquire_pending = true;
          t.actions.push_back(act(ActionKind::StartAcquire));
          t.actions.push_back(say_action(say::acquiring()));
          return t;
        case EventKind::PressDeploy:
          if (!has_fw) {
            t.actions.push_back(say_action(say::no_firmware()));
            return t;
          }
          if (m.deploy_armed) return ignored(m);
          n.deploy_armed = true;
          t.actions.push_back(say_action(say::deploy_armed()));
          return t;
        case EventKind::LidClosed:
          if (has_fw && m.deploy_armed) {
            n.state = BoxState::Deploy_FW;
            n.session_open = true;
            n.announced = false;
            t.actions.push_back(act(ActionKind::StartSession));
            t.actions.push_back(act(ActionKind::StartNetwork));
            t.actions.push_back(act(ActionKind::RestartDeployTimer));
            t.actions.push_back(say_action(say::deploy_started()));
            return t;
          }
          n.deploy_armed = false;
          n.state = has_fw ? BoxState::BoxClosed_FW : BoxState::BoxClosed_NoFW;
          if (has_fw) t.actions.push_back(say_action(say::closed_portable()));
          return t;
        default:
          return ignored(m);
      }
    }

    case BoxState::BoxClosed_NoFW:
    case BoxState::BoxClosed_FW:
      if (e.kind != EventKind::LidOpened) return ignored(m);
      n.state = m.state == BoxState::BoxClosed_FW ? BoxState::BoxOpen_FW : BoxState::BoxOpen_NoFW;
      t.actions.push_back(say_action(say::ready(n.state == BoxState::BoxOpen_FW)));
      return t;

    case BoxState::Deploy_FW:
      if (m.session_open) {
        switch (e.kind) {
          case EventKind::OtaRequest:
            t.actions.push_back(act(ActionKind::ServeOta, e));
            t.actions.push_back(act(ActionKind::RestartDeployTimer));
            return t;
          case EventKind::ErasureResult:
            t.actions.push_back(act(ActionKind::RecordErasure, e));
            t.actions.push_back(act(ActionKind::RestartDeployTimer));
            return t;
          case EventKind::DeployTimeout:
            n.session_open = false;
            n.deploy_armed = false;
            t.actions.push_back(act(ActionKind::StopNetwork));
            t.actions.push_back(act(ActionKind::CancelDeployTimer));
            if (session.served_macs.empty()) {
              n.state = BoxState::BoxClosed_FW;
              t.actions.push_back(say_action(announce(session)));
            } else {
              n.announced = true;
              t.actions.push_back(say_action(announce(session)));
            }
            return t;
          case EventKind::LidOpened: {
            n = MachineState{};
            n.powered = true;
            n.state = BoxState::BoxOpen_NoFW;
            n.acquire_pending = m.acquire_pending;
            t.actions.push_back(act(ActionKind::StopNetwork));
            t.actions.push_back(act(ActionKind::CancelDeployTimer));
            t.actions.push_back(act(ActionKind::EraseKeys));
            t.actions.push_back(say_action(say::panic_abort(inv.keys.size())));
            return t;
          }
          default:
            return ignored(m);
        }
      }
      if (m.announced && e.kind == EventKind::LidOpened) {
        const bool stocked = inv.stocked();
        n.announced = false;
        n.deploy_armed = false;
        n.state = stocked ? BoxState::BoxOpen_FW : BoxState::BoxOpen_NoFW;
        t.actions.push_back(say_action(say::ready(stocked)));
        return t;
      }
      return ignored(m);
  }
  return ignored(m);
}

}  // namespace faraday::box
