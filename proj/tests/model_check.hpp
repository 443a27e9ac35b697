#pragma once

// Exhaustive search over Box event strings, comparing step() with an
// independently written transition table. Shared by the unit tests and the
// acceptance runner.

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faraday/box.hpp"

namespace faraday::box::model {

inline firmware::FirmwareImage dummy_template() {
  Bytes blob(128, 0x11);
  std::copy(firmware::kKeyPlaceholder.begin(), firmware::kKeyPlaceholder.end(), blob.begin() + 40);
  return firmware::make_runtime_template("sensor-runtime", std::move(blob));
}

inline crypto::SecretKey dummy_key(std::uint8_t i) {
  Bytes b(32, i);
  return crypto::SecretKey::from_bytes(b);
}

inline BoxInventory inventory(std::size_t keys, bool with_template = true, std::size_t threshold = 1) {
  BoxInventory inv;
  inv.key_threshold = threshold;
  if (with_template) inv.images.push_back(dummy_template());
  for (std::size_t i = 0; i < keys; ++i) inv.keys.push_back(dummy_key(static_cast<std::uint8_t>(i)));
  return inv;
}

inline bool has_action(const Transition& t, ActionKind k) {
  for (const auto& a : t.actions) {
    if (a.kind == k) return true;
  }
  return false;
}

inline const MacAddress kMac{{0x02, 0, 0, 0, 0, 1}};

enum class MacPhase { None, Boot, Challenged, Erased, Failed, Flashed };

// Abstract environment around the pure machine: just enough inventory and
// session state to drive every guard in step().
struct World {
  MachineState m;
  std::size_t keys = 0;
  bool has_template = false;
  bool staged = false;
  MacPhase mac = MacPhase::None;
  bool lid_open = true;  // physical lid, last lid event wins
  bool network = false;
  auto operator<=>(const World&) const = default;
};

inline constexpr std::size_t kStagedKeys = 3;

inline BoxInventory inventory_of(const World& w, std::size_t threshold) {
  auto inv = inventory(w.keys, w.has_template, threshold);
  if (w.staged) {
    Acquisition a{{dummy_template()}, {}};
    for (std::size_t i = 0; i < kStagedKeys; ++i) a.keys.push_back(dummy_key(static_cast<std::uint8_t>(100 + i)));
    inv.staged = a;
  }
  return inv;
}

inline DeploySession session_of(const World& w) {
  DeploySession s;
  if (w.mac == MacPhase::None) return s;
  static const std::map<MacPhase, MacStage> stage{{MacPhase::Boot, MacStage::BootloaderServed},
                                                  {MacPhase::Challenged, MacStage::ChallengeIssued},
                                                  {MacPhase::Erased, MacStage::Erased},
                                                  {MacPhase::Failed, MacStage::ErasureFailed},
                                                  {MacPhase::Flashed, MacStage::RuntimeFlashed}};
  s.served_macs[kMac].stage = stage.at(w.mac);
  return s;
}

// The transition table written out independently of step(). nullopt means
// the pair is undefined and must be ignored.
inline std::optional<MachineState> reference(const MachineState& m, const BoxEvent& e, bool stocked, bool stocked_after,
                                      bool session_empty) {
  using K = EventKind;
  using S = BoxState;
  auto n = m;
  if (!m.powered) {
    if (e.kind != K::PowerOn) return std::nullopt;
    n = MachineState{};
    n.powered = true;
    n.state = stocked ? S::BoxOpen_FW : S::BoxOpen_NoFW;
    return n;
  }
  if (e.kind == K::PowerOn) return std::nullopt;
  if (e.kind == K::RogueDetected) return m;
  if (e.kind == K::AcquireCompleted || e.kind == K::AcquireFailed) {
    if (!m.acquire_pending) return std::nullopt;
    n.acquire_pending = false;
    if (e.kind == K::AcquireFailed || m.state == S::Deploy_FW) return n;
    const bool open = lid_open(m.state);
    n.state = open ? (stocked_after ? S::BoxOpen_FW : S::BoxOpen_NoFW)
                   : (stocked_after ? S::BoxClosed_FW : S::BoxClosed_NoFW);
    if (n.state == S::BoxOpen_NoFW) n.deploy_armed = false;
    return n;
  }
  switch (m.state) {
    case S::BoxOpen_NoFW:
    case S::BoxOpen_FW:
      if (e.kind == K::PressAcquire) {
        if (m.acquire_pending) return std::nullopt;
        n.acquire_pending = true;
        return n;
      }
      if (e.kind == K::PressDeploy) {
        if (m.state == S::BoxOpen_NoFW) return m;
        if (m.deploy_armed) return std::nullopt;
        n.deploy_armed = true;
        return n;
      }
      if (e.kind == K::LidClosed) {
        if (m.state == S::BoxOpen_FW && m.deploy_armed) {
          n.state = S::Deploy_FW;
          n.session_open = true;
          n.announced = false;
          return n;
        }
        n.deploy_armed = false;
        n.state = m.state == S::BoxOpen_FW ? S::BoxClosed_FW : S::BoxClosed_NoFW;
        return n;
      }
      return std::nullopt;
    case S::BoxClosed_FW:
    case S::BoxClosed_NoFW:
      if (e.kind != K::LidOpened) return std::nullopt;
      n.state = m.state == S::BoxClosed_FW ? S::BoxOpen_FW : S::BoxOpen_NoFW;
      return n;
    case S::Deploy_FW:
      if (m.session_open) {
        if (e.kind == K::OtaRequest || e.kind == K::ErasureResult) return m;
        if (e.kind == K::DeployTimeout) {
          n.session_open = false;
          n.deploy_armed = false;
          if (session_empty) n.state = S::BoxClosed_FW;
          else n.announced = true;
          return n;
        }
        if (e.kind == K::LidOpened) {
          n = MachineState{};
          n.powered = true;
          n.state = S::BoxOpen_NoFW;
          n.acquire_pending = m.acquire_pending;
          return n;
        }
        return std::nullopt;
      }
      if (m.announced && e.kind == K::LidOpened) {
        n.announced = false;
        n.deploy_armed = false;
        n.state = stocked ? S::BoxOpen_FW : S::BoxOpen_NoFW;
        return n;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

inline void apply(World& w, const Transition& t) {
  w.m = t.next;
  for (const auto& a : t.actions) {
    switch (a.kind) {
      case ActionKind::StartAcquire: w.staged = true; break;
      case ActionKind::CommitAcquired:
        if (w.staged) {
          w.keys += kStagedKeys;
          w.has_template = true;
          w.staged = false;
        }
        break;
      case ActionKind::DiscardAcquired: w.staged = false; break;
      case ActionKind::StartSession: w.mac = MacPhase::None; break;
      case ActionKind::StartNetwork: w.network = true; break;
      case ActionKind::StopNetwork: w.network = false; break;
      case ActionKind::EraseKeys:
        w.keys = 0;
        w.staged = false;
        break;
      case ActionKind::ServeOta:
        if (a.event.stage == OtaStage::Bootloader && w.mac == MacPhase::None) w.mac = MacPhase::Boot;
        if (a.event.stage == OtaStage::ErasureChallenge && (w.mac == MacPhase::Boot || w.mac == MacPhase::Erased))
          w.mac = MacPhase::Challenged;
        if (a.event.stage == OtaStage::Runtime && w.mac == MacPhase::Erased && w.keys > 0) {
          --w.keys;
          w.mac = MacPhase::Flashed;
        }
        break;
      case ActionKind::RecordErasure:
        if (w.mac == MacPhase::Challenged) w.mac = a.event.ok ? MacPhase::Erased : MacPhase::Failed;
        break;
      default: break;
    }
  }
}

inline std::vector<BoxEvent> alphabet() {
  std::vector<BoxEvent> out;
  for (auto k : {EventKind::PowerOn, EventKind::LidOpened, EventKind::LidClosed, EventKind::PressAcquire,
                 EventKind::PressDeploy, EventKind::DeployTimeout, EventKind::AcquireCompleted}) {
    out.push_back(BoxEvent::simple(k));
  }
  out.push_back(BoxEvent::acquire_failed("unreachable"));
  out.push_back(BoxEvent::rogue("faraday-ota", 6));
  out.push_back(BoxEvent::ota(kMac, OtaStage::Bootloader));
  out.push_back(BoxEvent::ota(kMac, OtaStage::ErasureChallenge));
  out.push_back(BoxEvent::ota(kMac, OtaStage::Runtime));
  out.push_back(BoxEvent::erasure(kMac, true));
  out.push_back(BoxEvent::erasure(kMac, false));
  return out;
}

struct CheckStats {
  std::size_t states = 0, transitions = 0, serving_states = 0, violations = 0;
  std::string first_violation;

  void violation(std::string what) {
    if (violations++ == 0) first_violation = std::move(what);
  }
};

inline CheckStats model_check(World start, std::size_t threshold, int depth) {
  const auto events = alphabet();
  std::map<World, int> seen{{start, 0}};
  std::deque<World> frontier{start};
  CheckStats stats;
  while (!frontier.empty()) {
    const World w = frontier.front();
    frontier.pop_front();
    const int d = seen.at(w);
    if (w.m.serving()) ++stats.serving_states;
    // Safety: never serve, never radiate with the lid open.
    if (w.m.serving() && w.lid_open) stats.violation("serving with the lid open");
    if (w.network && w.lid_open) stats.violation("network up with the lid open");
    if (d == depth) continue;
    const auto inv = inventory_of(w, threshold);
    const auto session = session_of(w);
    for (const auto& e : events) {
      const auto t = step(w.m, e, inv, session);
      ++stats.transitions;
      const auto expected = reference(w.m, e, inv.stocked(), inv.stocked_after_commit(), session.served_macs.empty());
      const auto where = std::string(to_string(w.m.state)) + " + " + std::string(to_string(e.kind));
      if (expected) {
        if (!t.handled || !(t.next == *expected)) stats.violation("table mismatch: " + where);
      } else if (t.handled || !(t.next == w.m) || !t.actions.empty()) {
        stats.violation("undefined pair acted: " + where);
      }
      if (has_action(t, ActionKind::ServeOta) && (!w.m.serving() || w.lid_open)) {
        stats.violation("served outside a closed deploy session: " + where);
      }
      if (has_action(t, ActionKind::StartNetwork) && (e.kind != EventKind::LidClosed || !t.next.serving())) {
        stats.violation("network started outside lid close into deploy: " + where);
      }
      World next = w;
      apply(next, t);
      if (e.kind == EventKind::LidOpened) next.lid_open = true;
      if (e.kind == EventKind::LidClosed) next.lid_open = false;
      if (!seen.count(next)) {
        seen.emplace(next, d + 1);
        frontier.push_back(next);
      }
    }
  }
  stats.states = seen.size();
  return stats;
}

/// The four starting worlds: empty, restored with stock, a threshold the
/// staged keys cannot meet, and a zero threshold.
inline std::vector<std::pair<World, std::size_t>> start_worlds() {
  World empty;
  World restored;
  restored.keys = 2;
  restored.has_template = true;
  return {{empty, 1}, {restored, 1}, {empty, 5}, {restored, 0}};
}

}  // namespace faraday::box::model
