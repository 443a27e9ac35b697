#pragma once

#include <array>
#include <compare>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faraday/clock.hpp"
#include "faraday/crypto.hpp"
#include "faraday/erasure.hpp"
#include "faraday/firmware.hpp"

namespace faraday::box {

enum class BoxState { BoxOpen_NoFW, BoxOpen_FW, BoxClosed_NoFW, BoxClosed_FW, Deploy_FW };

std::string_view to_string(BoxState s);
BoxState box_state_from_string(std::string_view s);
/// True for the two BoxOpen_* states.
bool lid_open(BoxState s);

struct MacAddress {
  std::array<std::uint8_t, 6> octets{};

  std::string str() const;  // "02:a1:..."
  static MacAddress parse(std::string_view s);
  auto operator<=>(const MacAddress&) const = default;
};

enum class OtaStage { Bootloader, ErasureChallenge, Runtime };
std::string_view to_string(OtaStage s);
OtaStage ota_stage_from_string(std::string_view s);

enum class EventKind {
  PowerOn,
  LidOpened,
  LidClosed,
  PressAcquire,
  PressDeploy,
  OtaRequest,
  ErasureResult,
  DeployTimeout,
  RogueDetected,
  AcquireCompleted,
  AcquireFailed,
};
std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

struct BoxEvent {
  EventKind kind = EventKind::PowerOn;
  MacAddress mac{};                      // OtaRequest, ErasureResult
  OtaStage stage = OtaStage::Bootloader;  // OtaRequest
  std::string image;                     // OtaRequest (Runtime)
  bool ok = false;                       // ErasureResult
  std::string ssid;                      // RogueDetected
  int channel = 0;                       // RogueDetected
  std::string cause;                     // AcquireFailed

  static BoxEvent simple(EventKind k) {
    BoxEvent e;
    e.kind = k;
    return e;
  }
  static BoxEvent ota(MacAddress mac, OtaStage stage, std::string image = {});
  static BoxEvent erasure(MacAddress mac, bool ok);
  static BoxEvent rogue(std::string ssid, int channel);
  static BoxEvent acquire_failed(std::string cause);

  /// {"kind": "...", ...} with only the fields the kind uses.
  std::string to_json() const;
  static BoxEvent from_json(std::string_view json);
};

/// Images and keys fetched by acquire but not yet committed.
struct Acquisition {
  std::vector<firmware::FirmwareImage> images;
  std::vector<crypto::SecretKey> keys;
};

struct BoxInventory {
  std::vector<firmware::FirmwareImage> images;  // templates and bootloader base
  std::deque<crypto::SecretKey> keys;
  std::size_t key_threshold = 1;
  std::size_t keys_acquired = 0;
  std::size_t keys_spent = 0;
  std::size_t keys_erased = 0;  // panic abort
  std::optional<Acquisition> staged;

  bool has_runtime_template() const;
  /// At least one runtime template and strictly more keys than the threshold.
  bool stocked() const;
  const firmware::FirmwareImage* find_image(std::string_view name) const;
  const firmware::FirmwareImage* bootloader_base() const;
  /// Keys staged with the acquisition, counted as if committed.
  bool stocked_after_commit() const;
};

enum class MacStage { BootloaderServed, ChallengeIssued, Erased, ErasureFailed, RuntimeFlashed };
std::string_view to_string(MacStage s);

struct MacProgress {
  MacStage stage = MacStage::BootloaderServed;
  std::optional<erasure::Seed> challenge;
  std::string image;
  Bytes runtime_container;  // cached for retries
  std::size_t requests = 0;
};

struct DeploySession {
  std::map<MacAddress, MacProgress> served_macs;
  SimTime started_at{};
  SimTime timeout = seconds(60);
  bool out_of_keys_announced = false;
  Bytes bootloader_container;  // signed stage, built on first use

  std::size_t runtime_flashed() const;
  std::size_t erasure_failed() const;
};

enum class UtteranceId {
  ReadyNoFirmware,
  ReadyFirmware,
  Acquiring,
  AcquireDone,
  AcquireInsufficient,
  AcquireFailed,
  DeployArmed,
  NoFirmware,
  ClosedPortable,
  DeployStarted,
  NoNodesFound,
  Provisioned,
  OutOfKeys,
  PanicAbort,
  RogueWarning,
};
std::string_view to_string(UtteranceId id);

struct Utterance {
  UtteranceId id;
  std::string text;
};

namespace say {
Utterance ready(bool stocked);
Utterance acquiring();
Utterance acquire_done(std::size_t keys);
Utterance acquire_insufficient(std::size_t keys, std::size_t threshold);
Utterance acquire_failed(std::string_view cause);
Utterance deploy_armed();
Utterance no_firmware();
Utterance closed_portable();
Utterance deploy_started();
Utterance out_of_keys();
Utterance panic_abort(std::size_t erased);
Utterance rogue_warning(std::string_view ssid, int channel);
}  // namespace say

/// End-of-session announcement: provisioned count, failed erasures, and the
/// instruction to open the Box.
Utterance announce(const DeploySession& session);

/// Machine context beyond the five named states.
struct MachineState {
  bool powered = false;
  BoxState state = BoxState::BoxOpen_NoFW;
  bool deploy_armed = false;
  bool acquire_pending = false;
  bool session_open = false;  // in-Box network up, OTA served
  bool announced = false;     // Deploy_FW after the end-of-session announcement

  /// The only configuration in which OTA traffic is served.
  bool serving() const { return powered && state == BoxState::Deploy_FW && session_open; }
  auto operator<=>(const MachineState&) const = default;
};

enum class ActionKind {
  Say,
  StartAcquire,
  CommitAcquired,
  DiscardAcquired,
  StartSession,
  StartNetwork,
  StopNetwork,
  RestartDeployTimer,
  CancelDeployTimer,
  ServeOta,
  RecordErasure,
  EraseKeys,
};
std::string_view to_string(ActionKind k);

struct Action {
  ActionKind kind;
  std::optional<Utterance> utterance;  // Say
  BoxEvent event{};                    // ServeOta / RecordErasure: the triggering event
};

struct Transition {
  MachineState next;
  std::vector<Action> actions;
  bool handled = true;  // false: undefined pair, logged no-op
};

/// The Box state machine. Pure: reads inventory and session, never mutates.
Transition step(const MachineState& machine, const BoxEvent& event, const BoxInventory& inventory,
                const DeploySession& session);

}  // namespace faraday::box
