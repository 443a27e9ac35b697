#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faraday/box.hpp"
#include "faraday/box_controller.hpp"
#include "faraday/crypto.hpp"
#include "faraday/erasure.hpp"
#include "faraday/firmware.hpp"
#include "faraday/http.hpp"

namespace faraday::node {

/// Network parameters and request paths baked into the factory bootloader.
/// Identical across a node type; the Box adapts to them.
struct FactoryDefaults {
  std::string ssid = "faraday-ota";
  std::string passphrase = "factory-default";
  std::string server_address = "192.168.4.1";
  box::OtaPaths paths;
};

enum class Mode { Bootloader, Runtime };
enum class Honesty { Honest, RetainsData, Silent };

std::string_view to_string(Mode m);
std::string_view to_string(Honesty h);
Honesty honesty_from_string(std::string_view s);

enum class Phase {
  Scanning,
  FetchBootloader,
  RequestChallenge,
  SubmitProof,
  FetchRuntime,
  Provisioned,
  Failed,
  Silent,
};
std::string_view to_string(Phase p);

struct NodeConfig {
  box::MacAddress mac;
  double rx_sensitivity_dbm = -90.0;
  double ptx_dbm = 0.0;
  double gain_db = 0.0;
  std::size_t memory_size = 256 * 1024;
  std::size_t bootloader_region = 32 * 1024;
  Honesty honesty = Honesty::Honest;
  std::size_t retained_bytes = 4096;  // RetainsData: bytes kept at the start of the bootloadable region
  std::string runtime_image;          // empty: the Box's default
  bool corrupt_key = false;           // fault injection: flip a key byte after extraction
  std::size_t max_attempts = 8;       // per phase
};

/// Locally administered, deterministic in (seed, index).
box::MacAddress node_mac(std::uint64_t seed, std::size_t index);

struct VisibleNetwork {
  std::string id;  // simulator handle
  std::string ssid;
  double rssi_dbm = 0;
};

/// Strongest network carrying the factory SSID at or above the sensitivity.
std::optional<std::string> scan_and_join(const std::vector<VisibleNetwork>& visible, std::string_view ssid,
                                         double rx_sensitivity_dbm);

enum class Progress { Advanced, RetryLater, Done, GaveUp };
std::string_view to_string(Progress p);

class SensorNode {
 public:
  SensorNode(NodeConfig config, FactoryDefaults defaults, std::uint64_t seed);

  const NodeConfig& config() const { return config_; }
  const FactoryDefaults& defaults() const { return defaults_; }
  const box::MacAddress& mac() const { return config_.mac; }
  Mode mode() const { return mode_; }
  Phase phase() const { return phase_; }

  const std::optional<std::string>& network() const { return network_; }
  void join(std::string network_id);
  void leave();

  /// The next bootstrap request, or nothing when idle, done or silent.
  std::optional<net::Request> next_request() const;
  Progress on_response(const net::Response& resp);
  /// Request or response lost on the air or the network went away.
  Progress on_timeout();

  /// Sealed telemetry addressed to the backend named in the runtime image.
  /// Throws std::logic_error outside Runtime.
  net::Request make_reading(ByteView payload);
  const std::optional<Bytes>& last_sealed() const { return last_sealed_; }

  /// Power cycle: boot counter advances, message counter restarts.
  void reboot();
  /// Physical switch back into the OTA bootloader.
  void enter_bootloader_mode();

  ByteView memory() const { return memory_; }
  ByteView bootloader_region() const;
  ByteView bootloadable_region() const;
  const std::optional<crypto::VerifyingKey>& installed_pubkey() const { return pubkey_; }
  /// Key read back from the flashed image; empty before Runtime.
  const std::optional<crypto::SecretKey>& key() const { return key_; }
  std::optional<crypto::KeyIdentity> identity() const;
  const std::optional<firmware::NetworkDescriptor>& backend_network() const { return backend_; }
  /// The image name the node asked for; empty when it took the Box's default.
  const std::string& runtime_image_name() const { return runtime_name_; }

  std::uint32_t boot_counter() const { return boot_counter_; }
  std::uint64_t msg_counter() const { return msg_counter_; }
  std::size_t rejected_images() const { return rejected_images_; }
  std::size_t attempts() const { return attempts_; }
  bool erasure_rejected() const { return erasure_rejected_; }
  /// Bytes present in the bootloadable region before any update.
  const Bytes& original_firmware() const { return original_; }

 private:
  Progress advance(Phase next);
  Progress retry();
  Progress fail();
  Progress install_bootloader(const net::Response& resp);
  Progress answer_challenge(const net::Response& resp);
  Progress install_runtime(const net::Response& resp);
  /// Region stays untouched unless the full image is in hand.
  void write_region(std::size_t offset, std::size_t region_size, ByteView image);

  NodeConfig config_;
  FactoryDefaults defaults_;
  Mode mode_ = Mode::Bootloader;
  Phase phase_ = Phase::Scanning;
  std::optional<std::string> network_;
  Bytes memory_;
  Bytes original_;
  std::optional<crypto::VerifyingKey> pubkey_;
  std::optional<erasure::ErasureProof> pending_proof_;
  std::optional<crypto::SecretKey> key_;
  std::optional<firmware::NetworkDescriptor> backend_;
  std::string runtime_name_;
  std::uint32_t boot_counter_ = 1;
  std::uint64_t msg_counter_ = 0;
  std::size_t rejected_images_ = 0;
  std::size_t attempts_ = 0;
  bool erasure_rejected_ = false;
  std::optional<Bytes> last_sealed_;
};

}  // namespace faraday::node
