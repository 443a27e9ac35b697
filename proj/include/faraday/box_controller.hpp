#pragma once

#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "faraday/box.hpp"
#include "faraday/http.hpp"

namespace faraday::box {

/// Request paths the node bootloader uses. They are factory defaults of the
/// nodes, so the Box takes them from configuration.
struct OtaPaths {
  std::string bootloader = "/ota/bootloader";
  std::string erasure = "/ota/erasure";
  std::string runtime = "/ota/runtime";
};

struct BoxConfig {
  std::string ssid = "faraday-ota";  // node factory default
  int channel = 6;
  MacAddress bssid{{0x02, 0xfa, 0x7a, 0xda, 0x70, 0x01}};
  OtaPaths paths;
  std::size_t key_threshold = 1;
  SimTime deploy_timeout = seconds(60);
  /// Node memory covered by the erasure proof (bootloader region exempt).
  std::size_t erasure_memory_bytes = 224 * 1024;
  std::string bootloader_image = "ota-bootloader";
  std::vector<std::string> runtime_images{"sensor-runtime"};
  std::size_t acquire_key_count = 10;
  std::string box_token = "box-shared-token";
};

/// Secrets that never leave the Box: the image signing pair and the key that
/// encrypts the persisted key store.
struct Hsm {
  crypto::SigningKeyPair signing;
  crypto::SecretKey device_key;

  static Hsm generate(crypto::RandomSource& rng);
};

struct SpeakerEntry {
  std::uint64_t seq = 0;  // from 1
  SimTime at{};
  UtteranceId id{};
  std::string text;
};

struct ObservedNetwork {
  std::string ssid;
  int channel = 0;
  MacAddress bssid;
  double rssi_dbm = 0;
};

/// Actions the controller cannot carry out itself: network, timers and the
/// wired acquire link belong to whoever hosts the Box.
inline bool is_external(ActionKind k) {
  switch (k) {
    case ActionKind::StartAcquire:
    case ActionKind::StartNetwork:
    case ActionKind::StopNetwork:
    case ActionKind::RestartDeployTimer:
    case ActionKind::CancelDeployTimer:
      return true;
    default:
      return false;
  }
}

struct Delivery {
  MachineState before;
  MachineState after;
  bool handled = false;
  std::vector<Action> external;
  std::optional<net::Response> reply;  // ServeOta
};

struct InventoryCounts {
  std::size_t keys = 0;
  std::size_t threshold = 0;
  std::size_t acquired = 0;
  std::size_t spent = 0;
  std::size_t erased = 0;
  std::vector<std::string> templates;
  bool has_bootloader = false;
};

struct SessionMac {
  MacAddress mac;
  MacStage stage{};
  std::string image;
  std::size_t requests = 0;
};

struct SessionView {
  bool started = false;
  SimTime started_at{};
  SimTime timeout{};
  std::vector<SessionMac> macs;
  std::size_t runtime_flashed = 0;
  std::size_t erasure_failed = 0;
  bool out_of_keys = false;
};

/// The Box: state machine plus everything its actions touch. Thread-safe;
/// every public member takes the same lock, so key pops and per-mac stage
/// updates are serialized even when OTA requests arrive concurrently.
class BoxController {
 public:
  BoxController(BoxConfig config, Hsm hsm, crypto::RandomSource& rng);

  Delivery deliver(const BoxEvent& event, SimTime now);

  /// Receives every external action, including those raised while serving
  /// OTA requests. Runs under the controller lock: must not call back in.
  using ActionSink = std::function<void(const Action&, SimTime)>;
  void set_action_sink(ActionSink sink);

  /// In-Box OTA endpoint. The requesting mac is taken from req.peer.
  net::Response handle_ota(const net::Request& req, SimTime now);
  net::Transport ota_transport(std::function<SimTime()> clock);

  /// Wired fetch of images and keys. Stages the result and returns the event
  /// to deliver; does no I/O under the lock.
  BoxEvent acquire(const net::Transport& backend);

  /// Delivers RogueDetected for every unwarned foreign network carrying the
  /// Box's SSID on its channel. Returns the events delivered.
  std::vector<BoxEvent> monitor_spectrum(const std::vector<ObservedNetwork>& networks, SimTime now);

  MachineState machine() const;
  BoxState state() const { return machine().state; }
  bool network_active() const;
  InventoryCounts counts() const;
  SessionView session() const;
  std::vector<SpeakerEntry> transcript(std::uint64_t since = 0) const;
  const BoxConfig& config() const { return config_; }
  crypto::VerifyingKey verifying_key() const { return hsm_.signing.verifying_key(); }

  /// Inventory snapshot with the key store encrypted under the device key.
  Bytes save_state();
  /// Replaces the inventory; the machine returns to unpowered.
  void load_state(ByteView file);

  /// Test access to the raw inventory (copy).
  BoxInventory inventory_copy() const;

 private:
  void say(const Utterance& u, SimTime now);
  void execute(const Action& a, SimTime now, Delivery& out);
  Delivery deliver_locked(const BoxEvent& event, SimTime now);
  net::Response serve_ota_locked(const BoxEvent& event, SimTime now);
  net::Response serve_bootloader(MacProgress& p);
  net::Response serve_challenge(MacProgress& p);
  net::Response serve_runtime(MacProgress& p, const std::string& image, SimTime now);
  void record_erasure(const BoxEvent& event);
  void commit_acquired();
  void erase_keys();

  BoxConfig config_;
  Hsm hsm_;
  crypto::RandomSource& rng_;
  ActionSink sink_;

  mutable std::mutex mu_;
  MachineState machine_;
  BoxInventory inventory_;
  DeploySession session_;
  bool session_started_ = false;
  bool network_active_ = false;
  std::set<MacAddress> warned_bssids_;
  std::vector<SpeakerEntry> transcript_;
};

/// Physical inputs accepted from outside: power, lid and the two buttons.
bool is_operator_event(EventKind k);

struct SubmitResult {
  bool handled = false;
  BoxState state{};
};

/// POST /box/event, GET /box/state, GET /box/transcript?since=, GET /box/session.
/// submit hands the event to whoever owns the event loop and returns once it
/// has been processed.
net::Router control_router(const BoxController& box, std::function<SubmitResult(const BoxEvent&)> submit);

std::string state_json(const BoxController& box);
std::string session_json(const BoxController& box);
std::string transcript_json(const BoxController& box, std::uint64_t since);

}  // namespace faraday::box
