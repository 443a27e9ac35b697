#include "faraday/backend.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace faraday::backend {

using nlohmann::ordered_json;

std::string_view to_string(KeyState s) {
  switch (s) {
    case KeyState::Fresh: return "fresh";
    case KeyState::IssuedToBox: return "issued_to_box";
    case KeyState::InUse: return "in_use";
    case KeyState::Blacklisted: return "blacklisted";
  }
  return "unknown";
}

KeyState key_state_from_string(std::string_view s) {
  for (auto k : {KeyState::Fresh, KeyState::IssuedToBox, KeyState::InUse, KeyState::Blacklisted}) {
    if (to_string(k) == s) return k;
  }
  throw DecodeError("unknown key state '" + std::string(s) + "'");
}

bool transition_allowed(KeyState from, KeyState to) {
  switch (from) {
    case KeyState::Fresh: return to == KeyState::IssuedToBox;
    case KeyState::IssuedToBox: return to == KeyState::InUse || to == KeyState::Blacklisted;
    case KeyState::InUse: return to == KeyState::Blacklisted;
    case KeyState::Blacklisted: return false;
  }
  return false;
}

void KeyRecord::move_to(KeyState next) {
  if (!transition_allowed(state, next)) {
    throw StateError("forbidden key transition " + std::string(to_string(state)) + " -> " +
                     std::string(to_string(next)));
  }
  state = next;
}

ShortageError::ShortageError(std::size_t requested, std::size_t available)
    : std::runtime_error("insufficient fresh keys: requested " + std::to_string(requested) + ", available " +
                         std::to_string(available) + ", deficit " + std::to_string(requested - available)),
      deficit_(requested - available) {}

Backend::Backend(BackendConfig config) : config_(std::move(config)) {}

std::vector<KeyRecord> Backend::create_keys(std::size_t n, crypto::RandomSource& rng) {
  if (n == 0) throw std::invalid_argument("create_keys: n must be >= 1");
  std::lock_guard lock(mu_);
  std::vector<KeyRecord> out;
  out.reserve(n);
  while (out.size() < n) {
    KeyRecord rec;
    rec.key = crypto::generate_key(rng);
    rec.identity = crypto::derive_identity(rec.key);
    if (keys_.contains(rec.identity)) continue;  // a repeat would mean a broken RNG
    rec.serial = next_serial_++;
    keys_.emplace(rec.identity, rec);
    out.push_back(std::move(rec));
  }
  return out;
}

void Backend::register_image(firmware::FirmwareImage image) {
  if (image.kind == firmware::ImageKind::RuntimePatched) {
    throw firmware::ImageError("backend only distributes templates and bootloader stages");
  }
  firmware::validate_image(image);
  std::lock_guard lock(mu_);
  if (images_.contains(image.name)) throw firmware::ImageError("image name '" + image.name + "' already registered");
  auto name = image.name;
  images_.emplace(std::move(name), std::move(image));
}

const firmware::FirmwareImage& Backend::build_and_register_template(const std::string& name, std::size_t size) {
  register_image(build_runtime_template(name, ap_credentials(), size));
  std::lock_guard lock(mu_);
  return images_.at(name);
}

std::optional<firmware::FirmwareImage> Backend::image(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = images_.find(name);
  if (it == images_.end()) return std::nullopt;
  return it->second;
}

DownloadResponse Backend::handle_box_download(const DownloadRequest& req, SimTime now) {
  std::lock_guard lock(mu_);
  if (req.box_token != config_.box_token) throw crypto::AuthError("bad box token");

  DownloadResponse resp;
  for (const auto& name : req.image_names) {
    auto it = images_.find(name);
    if (it == images_.end()) throw std::out_of_range("unknown image '" + name + "'");
    resp.images.push_back(it->second);
  }

  std::vector<KeyRecord*> fresh;
  for (auto& [id, rec] : keys_) {
    if (rec.state == KeyState::Fresh) fresh.push_back(&rec);
  }
  if (fresh.size() < req.key_count) throw ShortageError(req.key_count, fresh.size());
  std::sort(fresh.begin(), fresh.end(), [](auto* a, auto* b) { return a->serial < b->serial; });

  // Nothing has been mutated up to here.
  for (std::size_t i = 0; i < req.key_count; ++i) {
    fresh[i]->move_to(KeyState::IssuedToBox);
    fresh[i]->issued_at = now;
    resp.key_records.push_back(*fresh[i]);
  }
  return resp;
}

SensorReading Backend::ingest_reading(const crypto::SealedMessage& msg, SimTime now) {
  std::lock_guard lock(mu_);
  auto it = keys_.find(msg.identity);
  if (it == keys_.end()) {
    ++unknown_identity_;
    audit_.push_back("unknown identity " + msg.identity.hex());
    throw UnknownIdentity("unknown identity " + msg.identity.hex());
  }
  auto& rec = it->second;
  if (rec.state == KeyState::Blacklisted) {
    ++rejected_;
    audit_.push_back("blacklisted identity " + msg.identity.hex());
    throw Rejected("identity " + msg.identity.hex() + " is blacklisted");
  }
  if (rec.state == KeyState::Fresh) {
    // Never left the backend, so no node can legitimately hold it.
    ++rejected_;
    audit_.push_back("unissued identity " + msg.identity.hex());
    throw Rejected("identity " + msg.identity.hex() + " was never issued");
  }
  Bytes payload;
  try {
    payload = crypto::open(msg, rec.key);
  } catch (const crypto::AuthError&) {
    ++auth_failures_;
    audit_.push_back("authentication failure for " + msg.identity.hex());
    throw;
  }
  if (rec.state == KeyState::IssuedToBox) rec.move_to(KeyState::InUse);
  rec.last_seen = now;
  SensorReading reading{msg.identity, now, std::move(payload)};
  readings_.push_back(reading);
  return reading;
}

std::vector<crypto::KeyIdentity> Backend::blacklist_sweep(SimTime now, SimTime timeout) {
  if (timeout <= SimTime::zero()) throw std::invalid_argument("blacklist timeout must be > 0");
  std::lock_guard lock(mu_);
  std::vector<crypto::KeyIdentity> out;
  for (auto& [id, rec] : keys_) {
    if (rec.state == KeyState::IssuedToBox && now - *rec.issued_at > timeout) {
      rec.move_to(KeyState::Blacklisted);
      out.push_back(id);
    }
  }
  return out;
}

std::vector<crypto::KeyIdentity> Backend::blacklist_sweep(SimTime now) {
  return blacklist_sweep(now, config_.blacklist_timeout);
}

firmware::NetworkDescriptor Backend::ap_credentials() const {
  std::lock_guard lock(mu_);
  return config_.credentials;
}

void Backend::set_credentials(firmware::NetworkDescriptor creds) {
  std::lock_guard lock(mu_);
  config_.credentials = std::move(creds);
}

StatusCounts Backend::status() const {
  std::lock_guard lock(mu_);
  StatusCounts c;
  for (const auto& [id, rec] : keys_) {
    switch (rec.state) {
      case KeyState::Fresh: ++c.fresh; break;
      case KeyState::IssuedToBox: ++c.issued_to_box; break;
      case KeyState::InUse: ++c.in_use; break;
      case KeyState::Blacklisted: ++c.blacklisted; break;
    }
  }
  c.readings = readings_.size();
  c.unknown_identity = unknown_identity_;
  c.auth_failures = auth_failures_;
  c.rejected = rejected_;
  return c;
}

std::optional<KeyRecord> Backend::find(const crypto::KeyIdentity& id) const {
  std::lock_guard lock(mu_);
  auto it = keys_.find(id);
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

std::vector<KeyRecord> Backend::records() const {
  std::lock_guard lock(mu_);
  std::vector<KeyRecord> out;
  for (const auto& [id, rec] : keys_) out.push_back(rec);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.serial < b.serial; });
  return out;
}

std::vector<SensorReading> Backend::readings() const {
  std::lock_guard lock(mu_);
  return readings_;
}

std::vector<std::string> Backend::audit_log() const {
  std::lock_guard lock(mu_);
  return audit_;
}

namespace {

ordered_json time_or_null(const std::optional<SimTime>& t) {
  return t ? ordered_json(t->count()) : ordered_json(nullptr);
}

std::optional<SimTime> time_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return SimTime(j.get<std::int64_t>());
}

}  // namespace

std::string Backend::snapshot_locked() const {
  ordered_json j;
  j["format"] = "faraday-backend-state/1";
  j["next_serial"] = next_serial_;
  auto& keys = j["keys"] = ordered_json::array();
  for (const auto& [id, rec] : keys_) {
    keys.push_back({{"serial", rec.serial},
                    {"identity", id.hex()},
                    {"key", to_hex(rec.key.view())},
                    {"state", to_string(rec.state)},
                    {"issued_at", time_or_null(rec.issued_at)},
                    {"last_seen", time_or_null(rec.last_seen)}});
  }
  auto& images = j["images"] = ordered_json::array();
  for (const auto& [name, img] : images_) {
    images.push_back({{"name", name}, {"container", to_hex(firmware::encode_container(img))}});
  }
  auto& readings = j["readings"] = ordered_json::array();
  for (const auto& r : readings_) {
    readings.push_back({{"identity", r.identity.hex()}, {"received_at", r.received_at.count()},
                        {"payload", to_hex(r.payload)}});
  }
  j["counters"] = {{"unknown_identity", unknown_identity_}, {"auth_failures", auth_failures_},
                   {"rejected", rejected_}};
  return j.dump(1);
}

std::string Backend::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_locked();
}

void Backend::restore(const std::string& snapshot) {
  const auto j = ordered_json::parse(snapshot);
  if (j.value("format", "") != "faraday-backend-state/1") throw DecodeError("not a backend state file");
  std::map<crypto::KeyIdentity, KeyRecord> keys;
  for (const auto& k : j.at("keys")) {
    KeyRecord rec;
    rec.serial = k.at("serial").get<std::uint64_t>();
    rec.key = crypto::SecretKey::from_bytes(from_hex(k.at("key").get<std::string>()));
    rec.identity = crypto::derive_identity(rec.key);
    if (rec.identity.hex() != k.at("identity").get<std::string>()) throw DecodeError("state file identity mismatch");
    rec.state = key_state_from_string(k.at("state").get<std::string>());
    rec.issued_at = time_from(k.at("issued_at"));
    rec.last_seen = time_from(k.at("last_seen"));
    keys.emplace(rec.identity, std::move(rec));
  }
  std::map<std::string, firmware::FirmwareImage> images;
  for (const auto& i : j.at("images")) {
    auto name = i.at("name").get<std::string>();
    images.emplace(name, firmware::decode_container(from_hex(i.at("container").get<std::string>()), name));
  }
  std::vector<SensorReading> readings;
  for (const auto& r : j.at("readings")) {
    readings.push_back({crypto::KeyIdentity::from_hex(r.at("identity").get<std::string>()),
                        SimTime(r.at("received_at").get<std::int64_t>()),
                        from_hex(r.at("payload").get<std::string>())});
  }
  std::lock_guard lock(mu_);
  keys_ = std::move(keys);
  images_ = std::move(images);
  readings_ = std::move(readings);
  next_serial_ = j.at("next_serial").get<std::uint64_t>();
  const auto& c = j.at("counters");
  unknown_identity_ = c.at("unknown_identity").get<std::size_t>();
  auth_failures_ = c.at("auth_failures").get<std::size_t>();
  rejected_ = c.at("rejected").get<std::size_t>();
}

void Backend::save(const std::filesystem::path& path) const {
  const auto data = snapshot();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << data;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Backend::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  restore(ss.str());
}

}  // namespace faraday::backend
