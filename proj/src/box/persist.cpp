#include <sodium.h>

#include "faraday/box_controller.hpp"

namespace faraday::box {

namespace {
constexpr std::string_view kStateMagic = "FARADAYBOX_STATE1";
}

// magic | wrapped body (blob), where the body is
// threshold, acquired, spent, erased (u64) | image count (u32)
// | per image: name (u16 + bytes), container (blob) | key count (u32) | keys
Bytes BoxController::save_state() {
  std::lock_guard lock(mu_);
  ByteWriter w;
  w.u64(inventory_.key_threshold);
  w.u64(inventory_.keys_acquired);
  w.u64(inventory_.keys_spent);
  w.u64(inventory_.keys_erased);
  w.u32(static_cast<std::uint32_t>(inventory_.images.size()));
  for (const auto& img : inventory_.images) {
    w.u16(static_cast<std::uint16_t>(img.name.size()));
    w.raw(img.name);
    w.blob(firmware::encode_container(img));
  }
  w.u32(static_cast<std::uint32_t>(inventory_.keys.size()));
  for (const auto& k : inventory_.keys) w.raw(k.view());
  Bytes clear = std::move(w).take();
  ByteWriter out;
  out.raw(kStateMagic);
  out.blob(crypto::wrap(clear, hsm_.device_key.view(), rng_));
  sodium_memzero(clear.data(), clear.size());
  return std::move(out).take();
}

void BoxController::load_state(ByteView file) {
  ByteReader outer(file);
  if (faraday::to_string(outer.raw(kStateMagic.size())) != kStateMagic) throw DecodeError("not a box state file");
  Bytes clear = crypto::unwrap(outer.blob(), hsm_.device_key.view());
  outer.expect_done("box state");
  ByteReader r(clear);
  BoxInventory inv;
  inv.key_threshold = r.u64();
  inv.keys_acquired = r.u64();
  inv.keys_spent = r.u64();
  inv.keys_erased = r.u64();
  const auto n_images = r.u32();
  for (std::uint32_t i = 0; i < n_images; ++i) {
    const auto name = faraday::to_string(r.raw(r.u16()));
    const auto container = r.blob();
    inv.images.push_back(firmware::decode_container(container, name));
  }
  const auto n_keys = r.u32();
  for (std::uint32_t i = 0; i < n_keys; ++i) inv.keys.push_back(crypto::SecretKey::from_bytes(r.raw(crypto::kKeySize)));
  r.expect_done("box state body");
  sodium_memzero(clear.data(), clear.size());

  std::lock_guard lock(mu_);
  inventory_ = std::move(inv);
  machine_ = MachineState{};
  session_ = DeploySession{};
  session_.timeout = config_.deploy_timeout;
  session_started_ = false;
  network_active_ = false;
}

}  // namespace faraday::box
