#pragma once

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "faraday/backend.hpp"
#include "faraday/box_controller.hpp"
#include "faraday/clock.hpp"
#include "faraday/node.hpp"
#include "faraday/radio.hpp"

namespace faraday::sim {

using Json = nlohmann::ordered_json;

/// Scenario rejected at load time; the CLI exits with status 2.
class InvalidScenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoxParams {
  box::BoxConfig config;
  double shielding_db = 40.0;
  double hw_attenuation_db = 80.0;
  double target_prx_dbm = -89.0;
  double calibration_distance_cm = 25.0;
  double max_ptx_dbm = 20.0;
  double gain_db = 0.0;
  double rx_sensitivity_dbm = -90.0;
  double freq_mhz = 2400.0;
  radio::ChannelParams channel{20e6, 72.2e6, radio::kRoomTemperatureK};
};

struct TemplateSpec {
  std::string name;
  std::size_t size = 64 * 1024;
};

struct BackendParams {
  backend::BackendConfig config;
  std::size_t initial_keys = 20;
  std::vector<TemplateSpec> templates{{"sensor-runtime", 64 * 1024}};
  std::size_t bootloader_size = 16 * 1024;
  double wired_rate_bps = 100e6;
};

struct NodeSpec {
  std::string id;
  node::NodeConfig config;
  double distance_cm = 20.0;      // from the Box antenna while inside
  double field_distance_cm = 1000.0;  // to the field gateway after deployment
  double boot_delay_s = 1.0;
  bool placed = true;              // inside the Box at t = 0
};

enum class AttackerKind { Eavesdropper, RogueAp };

struct AttackerSpec {
  std::string name;
  AttackerKind kind = AttackerKind::Eavesdropper;
  double distance_cm = 50.0;        // from the Box antenna, outside the Box
  double field_distance_cm = 1000.0;  // from deployed nodes
  double grx_db = 30.0;
  double sensitivity_dbm = -96.0;
  // Rogue AP only.
  double ptx_dbm = 20.0;
  double gtx_db = 0.0;
  std::string ssid;  // empty: the Box's SSID
  int channel = 0;   // 0: the Box's channel
  box::MacAddress bssid{{0x02, 0xee, 0xee, 0x00, 0x00, 0x01}};
  double rate_bps = 6e6;
  bool active = true;
};

struct FieldParams {
  double rate_bps = 6e6;
  double gateway_gain_db = 0.0;
  double gateway_sensitivity_dbm = -90.0;
};

struct ScriptStep {
  double at_s = 0;
  std::string action;
  Json args;
};

struct AssertionSpec {
  std::string name;
  std::string metric;
  std::string op = "==";
  Json value;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  BoxParams box;
  BackendParams backend;
  node::FactoryDefaults factory;
  std::vector<NodeSpec> nodes;
  std::vector<AttackerSpec> attackers;
  FieldParams field;
  std::vector<ScriptStep> script;
  std::vector<AssertionSpec> assertions;
  std::optional<double> duration_s;
  double scan_interval_s = 1.0;
  double monitor_interval_s = 1.0;
  double retry_interval_s = 0.5;
  double frame_timeout_s = 0.2;
};

/// Throws InvalidScenario with a message naming the offending field.
Scenario parse_scenario(const Json& j);
Scenario load_scenario(const std::string& path);
void validate_scenario(const Scenario& s);

/// Software transmit power of the Box radio for the scenario (after
/// calibration) and the resulting power at the antenna port.
struct BoxRadio {
  double radio_ptx_dbm = 0;
  double antenna_ptx_dbm = 0;
};
BoxRadio calibrate_box(const BoxParams& p);

// ---- channel tap ----------------------------------------------------------

enum class LinkKind { BoxDownlink, NodeUplink, RogueDownlink, Field };
std::string_view to_string(LinkKind k);

struct Frame {
  SimTime at{};
  LinkKind link = LinkKind::BoxDownlink;
  std::string from;
  std::string to;
  double ptx_dbm = 0;
  double gtx_db = 0;
  double distance_to_listener_cm = 0;
  double lbox_db = 0;  // between transmitter and the listener
  radio::ChannelParams channel;
  Bytes bytes;
};

struct EavesdropEntry {
  SimTime at{};
  LinkKind link{};
  double prx_dbm = 0;
  double snr_db = 0;
  bool decodable = false;
  std::size_t size = 0;
  Bytes bytes;  // empty unless decodable
};

struct Listener {
  std::string name;
  double grx_db = 30.0;
  double sensitivity_dbm = -96.0;
  double freq_mhz = 2400.0;
};

/// Evaluates the frame at the listener; bytes are kept only when decodable.
EavesdropEntry tap_channel(const Frame& frame, const Listener& listener);

struct EavesdropSummary {
  std::size_t frames = 0;
  std::size_t decodable_frames = 0;
  std::size_t decoded_in_box_bytes = 0;  // Box downlink
  std::size_t decoded_uplink_bytes = 0;
  std::size_t decoded_field_bytes = 0;
  std::size_t key_pattern_matches = 0;
  double best_in_box_prx_dbm = -1e9;
};

class EavesdropLog {
 public:
  void add(EavesdropEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<EavesdropEntry>& entries() const { return entries_; }
  /// Occurrences of any of keys in decoded bytes.
  EavesdropSummary summarize(const std::vector<crypto::SecretKey>& keys) const;

 private:
  std::vector<EavesdropEntry> entries_;
};

// ---- rogue access point ---------------------------------------------------

/// Attacker OTA server impersonating the Box: serves a bootloader carrying
/// the attacker's key, waves any erasure proof through and then serves an
/// attacker-signed runtime image.
class RogueOtaServer {
 public:
  RogueOtaServer(const box::OtaPaths& paths, crypto::RandomSource& rng);
  net::Response handle(const net::Request& req);
  const crypto::VerifyingKey& verifying_key() const { return signing_.verifying_key(); }
  std::size_t requests() const { return requests_; }
  std::size_t images_served() const { return images_served_; }

 private:
  box::OtaPaths paths_;
  crypto::SigningKeyPair signing_;
  Bytes bootloader_;
  Bytes runtime_;
  crypto::RandomSource& rng_;
  std::size_t requests_ = 0;
  std::size_t images_served_ = 0;
};

// ---- simulation -----------------------------------------------------------

struct NodeEntity {
  NodeSpec spec;
  std::unique_ptr<node::SensorNode> node;
  bool inside = false;
  bool in_field = false;
  bool powered = false;
  bool scanning = false;  // a scan event is pending
  std::size_t exchanges = 0;
  std::size_t readings_sent = 0;
  std::size_t readings_accepted = 0;
  std::size_t readings_rejected = 0;
  std::optional<std::string> joined_rogue;
  std::vector<std::string> reading_results;
};

struct Exchange {
  std::string node;
  SimTime start{};
  SimTime end{};
  std::size_t bytes = 0;
};

struct RogueEntity {
  AttackerSpec spec;
  std::unique_ptr<RogueOtaServer> server;
  std::set<std::string> joined_by;
};

class Simulation {
 public:
  explicit Simulation(Scenario scenario, bool deterministic = true);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Runs the script to the horizon.
  void run();
  /// Processes every event with time <= t, then sets the clock to t.
  void run_until(SimTime t);
  SimTime now() const { return now_; }
  SimTime horizon() const { return horizon_; }
  /// Periodic scan and monitor events stop at the horizon unless unbounded.
  void set_unbounded(bool unbounded) { unbounded_ = unbounded; }

  const Scenario& scenario() const { return scenario_; }
  box::BoxController& box() { return *box_; }
  const box::BoxController& box() const { return *box_; }
  backend::Backend& backend() { return *backend_; }
  const backend::Backend& backend() const { return *backend_; }
  const std::vector<NodeEntity>& nodes() const { return nodes_; }
  const std::vector<RogueEntity>& rogues() const { return rogues_; }
  const std::map<std::string, EavesdropLog>& eavesdrop_logs() const { return eavesdrop_; }
  const std::vector<Exchange>& exchanges() const { return exchanges_; }
  const std::vector<std::string>& log() const { return log_; }
  bool lid_physically_open() const { return lid_open_; }
  const BoxRadio& box_radio() const { return box_radio_; }

  /// Interactive commands, applied at the current clock.
  box::SubmitResult submit(const box::BoxEvent& event);
  /// Throws std::invalid_argument for unknown ids or a closed lid.
  void place_node(const std::string& id);
  void remove_node(const std::string& id);
  void set_attacker_active(const std::string& name, bool active);

  /// Every key the backend ever issued to the Box.
  std::vector<crypto::SecretKey> issued_keys() const;

  Json report() const;

 private:
  struct Event {
    SimTime at;
    std::uint64_t entity;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.entity != b.entity) return a.entity > b.entity;
      return a.seq > b.seq;
    }
  };

  void schedule(SimTime at, std::uint64_t entity, std::function<void()> fn);
  void schedule_script();
  void execute_step(const ScriptStep& step);
  void deliver_box(const box::BoxEvent& event);
  void on_box_action(const box::Action& a, SimTime at);

  void boot_node(std::size_t i);
  void schedule_scan(std::size_t i, SimTime at);
  void scan(std::size_t i);
  void node_send(std::size_t i);
  void node_reply(std::size_t i, const std::string& network, net::Request req, SimTime sent, std::size_t up_bytes);
  void node_receive(std::size_t i, const net::Response& resp, SimTime sent, std::size_t bytes);
  void node_timeout(std::size_t i);
  void node_progress(std::size_t i, node::Progress p);
  void node_leave(std::size_t i);
  void schedule_monitor(SimTime at);
  void monitor();

  void send_readings(std::size_t count);
  void replay_reading(const std::string& id);
  void deploy_field();

  // Radio helpers.
  radio::ReceptionVerdict box_to_node(const NodeEntity& n) const;
  radio::ReceptionVerdict node_to_box(const NodeEntity& n) const;
  radio::ReceptionVerdict rogue_to_node(const RogueEntity& r, const NodeEntity& n) const;
  radio::ReceptionVerdict node_to_rogue(const NodeEntity& n, const RogueEntity& r) const;
  double lbox_between(bool a_inside, bool b_inside) const;
  void tap(Frame frame, bool transmitter_inside);
  void say_log(const std::string& line);

  std::size_t node_index(const std::string& id) const;
  std::uint64_t node_entity(std::size_t i) const { return 10 + i; }

  Scenario scenario_;
  bool deterministic_;
  std::unique_ptr<crypto::RandomSource> rng_;
  std::unique_ptr<crypto::RandomSource> box_rng_;
  std::unique_ptr<crypto::RandomSource> rogue_rng_;
  std::unique_ptr<backend::Backend> backend_;
  std::unique_ptr<box::BoxController> box_;
  BoxRadio box_radio_;
  net::Router backend_router_;
  bool backend_online_ = true;
  bool last_handled_ = false;

  std::vector<NodeEntity> nodes_;
  std::vector<RogueEntity> rogues_;
  std::vector<Listener> listeners_;
  std::vector<AttackerSpec> eavesdroppers_;
  std::map<std::string, EavesdropLog> eavesdrop_;
  std::vector<Exchange> exchanges_;
  std::vector<std::string> log_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  SimTime now_{};
  SimTime horizon_{};
  bool unbounded_ = false;
  bool lid_open_ = true;
  bool box_network_ = false;
  std::uint64_t timer_generation_ = 0;
  bool monitor_scheduled_ = false;
  std::size_t readings_total_ = 0;
};

// ---- report ---------------------------------------------------------------

/// Flat metric map the assertions are evaluated against.
Json metrics(const Simulation& sim);

struct AssertionResult {
  std::string name;
  bool passed = false;
  Json actual;
  std::string detail;
};

/// Throws InvalidScenario for unknown metrics or operators.
AssertionResult evaluate(const AssertionSpec& spec, const Json& metrics);

/// Exit codes of `faraday run`.
inline constexpr int kExitPass = 0;
inline constexpr int kExitAssertionFailed = 1;
inline constexpr int kExitInvalidScenario = 2;

struct RunOutcome {
  Json report;
  bool passed = true;
  std::vector<AssertionResult> assertions;
};

RunOutcome run_scenario(const Scenario& scenario, bool deterministic = true);

// ---- interactive mode -----------------------------------------------------

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  double time_scale = 1.0;
};

/// Hosts a live simulation: the Box control API, the /sim endpoints and the
/// event stream at GET /sim/events. The loop thread is the only writer of
/// simulation state; HTTP mutations are queued into it.
class InteractiveServer {
 public:
  InteractiveServer(Scenario scenario, ServeOptions options);
  ~InteractiveServer();

  /// Returns the bound port.
  int start();
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace faraday::sim
