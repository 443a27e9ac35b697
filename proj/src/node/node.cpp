#include "faraday/node.hpp"

#include <algorithm>
#include <stdexcept>

namespace faraday::node {

std::string_view to_string(Mode m) { return m == Mode::Runtime ? "Runtime" : "BootloaderMode"; }

std::string_view to_string(Honesty h) {
  switch (h) {
    case Honesty::Honest: return "honest";
    case Honesty::RetainsData: return "retains_data";
    case Honesty::Silent: return "silent";
  }
  return "?";
}

Honesty honesty_from_string(std::string_view s) {
  for (auto h : {Honesty::Honest, Honesty::RetainsData, Honesty::Silent}) {
    if (to_string(h) == s) return h;
  }
  throw DecodeError("unknown honesty '" + std::string(s) + "'");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Scanning: return "scanning";
    case Phase::FetchBootloader: return "fetch_bootloader";
    case Phase::RequestChallenge: return "request_challenge";
    case Phase::SubmitProof: return "submit_proof";
    case Phase::FetchRuntime: return "fetch_runtime";
    case Phase::Provisioned: return "provisioned";
    case Phase::Failed: return "failed";
    case Phase::Silent: return "silent";
  }
  return "?";
}

std::string_view to_string(Progress p) {
  switch (p) {
    case Progress::Advanced: return "advanced";
    case Progress::RetryLater: return "retry";
    case Progress::Done: return "done";
    case Progress::GaveUp: return "gave_up";
  }
  return "?";
}

box::MacAddress node_mac(std::uint64_t seed, std::size_t index) {
  crypto::SeededRandom rng(seed, "node-mac-" + std::to_string(index));
  box::MacAddress m;
  rng.fill(m.octets);
  m.octets[0] = static_cast<std::uint8_t>((m.octets[0] & 0xfc) | 0x02);  // unicast, locally administered
  m.octets[5] = static_cast<std::uint8_t>(index & 0xff);
  return m;
}

std::optional<std::string> scan_and_join(const std::vector<VisibleNetwork>& visible, std::string_view ssid,
                                         double rx_sensitivity_dbm) {
  const VisibleNetwork* best = nullptr;
  for (const auto& n : visible) {
    if (n.ssid != ssid || n.rssi_dbm < rx_sensitivity_dbm) continue;
    if (!best || n.rssi_dbm > best->rssi_dbm) best = &n;
  }
  if (!best) return std::nullopt;
  return best->id;
}

SensorNode::SensorNode(NodeConfig config, FactoryDefaults defaults, std::uint64_t seed)
    : config_(std::move(config)), defaults_(std::move(defaults)) {
  if (config_.bootloader_region >= config_.memory_size) {
    throw std::invalid_argument("bootloader region must be smaller than node memory");
  }
  memory_.resize(config_.memory_size);
  crypto::SeededRandom rng(seed, "node-memory-" + config_.mac.str());
  rng.fill(memory_);
  const auto stamp = [&](std::size_t at, std::string_view text) {
    std::copy(text.begin(), text.end(), memory_.begin() + static_cast<std::ptrdiff_t>(at));
  };
  stamp(0, "FACTORY-OTA-BOOTLOADER");
  stamp(config_.bootloader_region, "PREVIOUS-FIRMWARE " + config_.mac.str());
  original_.assign(memory_.begin() + static_cast<std::ptrdiff_t>(config_.bootloader_region), memory_.end());
}

ByteView SensorNode::bootloader_region() const { return ByteView(memory_).first(config_.bootloader_region); }

ByteView SensorNode::bootloadable_region() const { return ByteView(memory_).subspan(config_.bootloader_region); }

void SensorNode::join(std::string network_id) {
  network_ = std::move(network_id);
  if (phase_ == Phase::Scanning && mode_ == Mode::Bootloader) {
    phase_ = config_.honesty == Honesty::Silent ? Phase::Silent : Phase::FetchBootloader;
    attempts_ = 0;
  }
}

void SensorNode::leave() { network_.reset(); }

std::optional<net::Request> SensorNode::next_request() const {
  if (!network_ || mode_ != Mode::Bootloader) return std::nullopt;
  const auto& p = defaults_.paths;
  switch (phase_) {
    case Phase::FetchBootloader:
      return net::make_request("GET", p.bootloader);
    case Phase::RequestChallenge:
      return net::make_request("POST", p.erasure);
    case Phase::SubmitProof:
      return net::make_request("POST", p.erasure, pending_proof_->encode());
    case Phase::FetchRuntime: {
      auto target = p.runtime;
      if (!config_.runtime_image.empty()) target += "?image=" + config_.runtime_image;
      return net::make_request("GET", target);
    }
    default:
      return std::nullopt;
  }
}

Progress SensorNode::advance(Phase next) {
  phase_ = next;
  attempts_ = 0;
  return next == Phase::Provisioned ? Progress::Done : Progress::Advanced;
}

Progress SensorNode::retry() {
  if (++attempts_ >= config_.max_attempts) return fail();
  return Progress::RetryLater;
}

Progress SensorNode::fail() {
  phase_ = Phase::Failed;
  return Progress::GaveUp;
}

Progress SensorNode::on_timeout() {
  if (!network_ || mode_ != Mode::Bootloader) return Progress::GaveUp;
  switch (phase_) {
    case Phase::FetchBootloader:
    case Phase::RequestChallenge:
    case Phase::SubmitProof:
    case Phase::FetchRuntime:
      return retry();
    default:
      return Progress::GaveUp;
  }
}

Progress SensorNode::on_response(const net::Response& resp) {
  if (resp.status == 0 || resp.status >= 500) return on_timeout();
  switch (phase_) {
    case Phase::FetchBootloader:
      if (resp.status != 200) return fail();
      return install_bootloader(resp);
    case Phase::RequestChallenge:
      if (resp.status != 200) return fail();
      return answer_challenge(resp);
    case Phase::SubmitProof:
      if (resp.status == 403) {
        erasure_rejected_ = true;
        return fail();
      }
      if (resp.status != 200) return fail();
      pending_proof_.reset();
      return advance(Phase::FetchRuntime);
    case Phase::FetchRuntime:
      if (resp.status != 200) return fail();
      return install_runtime(resp);
    default:
      return Progress::GaveUp;
  }
}

void SensorNode::write_region(std::size_t offset, std::size_t region_size, ByteView image) {
  if (image.size() > region_size) throw std::length_error("image larger than region");
  Bytes region(memory_.begin() + static_cast<std::ptrdiff_t>(offset),
               memory_.begin() + static_cast<std::ptrdiff_t>(offset + region_size));
  std::copy(image.begin(), image.end(), region.begin());
  std::copy(region.begin(), region.end(), memory_.begin() + static_cast<std::ptrdiff_t>(offset));
}

Progress SensorNode::install_bootloader(const net::Response& resp) {
  firmware::FirmwareImage img;
  try {
    img = firmware::decode_container(resp.body, "bootloader");
  } catch (const std::exception&) {
    ++rejected_images_;
    return retry();
  }
  // The factory bootloader takes the first update unchecked; after that only
  // images signed with the installed key are accepted.
  const bool trusted = !pubkey_ || firmware::verify_image(img, *pubkey_);
  if (img.kind != firmware::ImageKind::BootloaderStage || !img.embedded_pubkey || !trusted ||
      img.bytes.size() > config_.bootloader_region) {
    ++rejected_images_;
    return retry();
  }
  write_region(0, config_.bootloader_region, img.bytes);
  pubkey_ = img.embedded_pubkey;
  return advance(Phase::RequestChallenge);
}

Progress SensorNode::answer_challenge(const net::Response& resp) {
  if (resp.body.size() != 32) return retry();
  erasure::Seed seed{};
  std::copy(resp.body.begin(), resp.body.end(), seed.begin());
  std::span<std::uint8_t> region(memory_.data() + config_.bootloader_region,
                                 memory_.size() - config_.bootloader_region);
  if (config_.honesty == Honesty::RetainsData) {
    const auto keep = std::min(config_.retained_bytes, region.size());
    Bytes kept(region.begin(), region.begin() + static_cast<std::ptrdiff_t>(keep));
    erasure::erasure_respond(region, seed);
    std::copy(kept.begin(), kept.end(), region.begin());
    pending_proof_ = erasure::erasure_prove(region, seed);
  } else {
    pending_proof_ = erasure::erasure_respond(region, seed);
  }
  return advance(Phase::SubmitProof);
}

Progress SensorNode::install_runtime(const net::Response& resp) {
  firmware::FirmwareImage img;
  try {
    img = firmware::decode_container(resp.body, config_.runtime_image);
  } catch (const std::exception&) {
    ++rejected_images_;
    return retry();
  }
  const auto region_size = config_.memory_size - config_.bootloader_region;
  if (img.kind != firmware::ImageKind::RuntimePatched || !pubkey_ || !firmware::verify_image(img, *pubkey_) ||
      img.bytes.size() > region_size) {
    ++rejected_images_;
    return retry();
  }
  crypto::SecretKey key;
  try {
    key = firmware::extract_key(img.bytes, img.placeholder_offsets);
  } catch (const firmware::ImageError&) {
    ++rejected_images_;
    return retry();
  }
  write_region(config_.bootloader_region, region_size, img.bytes);
  // Read the key back from flash, as the runtime would.
  key_ = firmware::extract_key(
      ByteView(memory_).subspan(config_.bootloader_region, img.bytes.size()), img.placeholder_offsets);
  if (config_.corrupt_key) {
    Bytes raw(key_->view().begin(), key_->view().end());
    raw[0] ^= 0x01;
    key_ = crypto::SecretKey::from_bytes(raw);
  }
  backend_ = firmware::NetworkDescriptor::find_in(img.bytes);
  runtime_name_ = img.name;
  mode_ = Mode::Runtime;
  reboot();
  return advance(Phase::Provisioned);
}

std::optional<crypto::KeyIdentity> SensorNode::identity() const {
  if (!key_) return std::nullopt;
  return crypto::derive_identity(*key_);
}

net::Request SensorNode::make_reading(ByteView payload) {
  if (mode_ != Mode::Runtime || !key_) throw std::logic_error("node is not running its runtime image");
  const crypto::Nonce nonce{boot_counter_, msg_counter_++};
  auto sealed = crypto::seal(payload, *key_, nonce).serialize();
  last_sealed_ = sealed;
  auto req = net::make_request("POST", "/readings", std::move(sealed));
  if (backend_) req.headers["Host"] = backend_->server_address;
  req.peer = config_.mac.str();
  return req;
}

void SensorNode::reboot() {
  ++boot_counter_;
  msg_counter_ = 0;
}

void SensorNode::enter_bootloader_mode() {
  mode_ = Mode::Bootloader;
  phase_ = Phase::Scanning;
  network_.reset();
  key_.reset();
  pending_proof_.reset();
  attempts_ = 0;
  erasure_rejected_ = false;
}

}  // namespace faraday::node
