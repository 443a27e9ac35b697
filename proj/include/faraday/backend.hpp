#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "faraday/clock.hpp"
#include "faraday/crypto.hpp"
#include "faraday/firmware.hpp"
#include "faraday/http.hpp"

namespace faraday::backend {

enum class KeyState { Fresh, IssuedToBox, InUse, Blacklisted };

std::string_view to_string(KeyState s);
KeyState key_state_from_string(std::string_view s);

/// Fresh -> IssuedToBox -> {InUse, Blacklisted}; InUse -> Blacklisted.
bool transition_allowed(KeyState from, KeyState to);

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct KeyRecord {
  crypto::SecretKey key;
  crypto::KeyIdentity identity;
  KeyState state = KeyState::Fresh;
  std::optional<SimTime> issued_at;
  std::optional<SimTime> last_seen;
  std::uint64_t serial = 0;  // creation order

  /// Throws StateError on a forbidden transition.
  void move_to(KeyState next);
};

struct SensorReading {
  crypto::KeyIdentity identity;
  SimTime received_at{};
  Bytes payload;
};

class ShortageError : public std::runtime_error {
 public:
  ShortageError(std::size_t requested, std::size_t available);
  std::size_t deficit() const noexcept { return deficit_; }

 private:
  std::size_t deficit_;
};

class UnknownIdentity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Rejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendConfig {
  std::string box_token = "box-shared-token";
  SimTime blacklist_timeout = std::chrono::hours(24);
  firmware::NetworkDescriptor credentials{"plant-sensors", "field-passphrase", "backend.local:8080"};
};

struct DownloadRequest {
  std::vector<std::string> image_names;
  std::size_t key_count = 0;
  std::string box_token;
};

struct DownloadResponse {
  std::vector<firmware::FirmwareImage> images;
  std::vector<KeyRecord> key_records;
};

struct StatusCounts {
  std::size_t fresh = 0, issued_to_box = 0, in_use = 0, blacklisted = 0;
  std::size_t readings = 0, unknown_identity = 0, auth_failures = 0, rejected = 0;
};

/// Builds runtime templates: a header, the embedded network descriptor, one
/// key placeholder and deterministic filler up to total_size bytes.
firmware::FirmwareImage build_runtime_template(const std::string& name,
                                               const firmware::NetworkDescriptor& creds,
                                               std::size_t total_size);
firmware::FirmwareImage build_bootloader_base(const std::string& name, std::size_t total_size);

/// The operator's trusted service. All public members are thread-safe;
/// mutations are serialized through one lock.
class Backend {
 public:
  explicit Backend(BackendConfig config = {});

  /// Throws std::invalid_argument for n == 0.
  std::vector<KeyRecord> create_keys(std::size_t n, crypto::RandomSource& rng);

  /// Throws firmware::ImageError if the image breaks its invariants or the
  /// name is taken.
  void register_image(firmware::FirmwareImage image);
  /// Builds a template from the current credentials and registers it.
  const firmware::FirmwareImage& build_and_register_template(const std::string& name, std::size_t size);
  std::optional<firmware::FirmwareImage> image(const std::string& name) const;

  /// All-or-nothing: on any error the database is untouched.
  /// Throws crypto::AuthError, ShortageError, or std::out_of_range for an
  /// unknown image.
  DownloadResponse handle_box_download(const DownloadRequest& req, SimTime now);

  /// Throws UnknownIdentity, Rejected (blacklisted) or crypto::AuthError.
  SensorReading ingest_reading(const crypto::SealedMessage& msg, SimTime now);

  /// Blacklists IssuedToBox keys with now - issued_at > timeout.
  std::vector<crypto::KeyIdentity> blacklist_sweep(SimTime now, SimTime timeout);
  std::vector<crypto::KeyIdentity> blacklist_sweep(SimTime now);

  firmware::NetworkDescriptor ap_credentials() const;
  void set_credentials(firmware::NetworkDescriptor creds);

  StatusCounts status() const;
  std::optional<KeyRecord> find(const crypto::KeyIdentity& id) const;
  std::vector<KeyRecord> records() const;  // creation order
  std::vector<SensorReading> readings() const;
  /// Rejected and failed ingestion attempts, oldest first.
  std::vector<std::string> audit_log() const;
  const BackendConfig& config() const { return config_; }

  /// Deterministic JSON snapshot of the whole database.
  std::string snapshot() const;
  void restore(const std::string& snapshot);
  /// Write-temp-then-rename.
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

  /// GET /firmware/{name}, GET /keys?count=N, POST /readings, GET /status.
  net::Router router(std::function<SimTime()> clock);

 private:
  std::string snapshot_locked() const;

  BackendConfig config_;
  mutable std::mutex mu_;
  std::map<crypto::KeyIdentity, KeyRecord> keys_;
  std::map<std::string, firmware::FirmwareImage> images_;
  std::vector<SensorReading> readings_;
  std::uint64_t next_serial_ = 0;
  std::size_t unknown_identity_ = 0;
  std::size_t auth_failures_ = 0;
  std::size_t rejected_ = 0;
  std::vector<std::string> audit_;
};

}  // namespace faraday::backend
