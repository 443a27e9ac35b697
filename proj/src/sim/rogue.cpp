#include "faraday/sim.hpp"

namespace faraday::sim {

RogueOtaServer::RogueOtaServer(const box::OtaPaths& paths, crypto::RandomSource& rng)
    : paths_(paths), signing_(crypto::SigningKeyPair::generate(rng)), rng_(rng) {
  Bytes base = to_bytes("ATTACKER-BOOTLOADER\n");
  base.resize(4096, 0xcc);
  bootloader_ = firmware::encode_container(firmware::sign_image(
      firmware::make_bootloader_stage("rogue-bootloader", std::move(base), signing_.verifying_key()), signing_));

  // A runtime image in the expected format, keyed with a key the attacker
  // chose, pointing at the attacker's own collector.
  Bytes blob = to_bytes("ATTACKER-RUNTIME\n");
  const auto desc = firmware::NetworkDescriptor{"attacker-net", "attacker", "attacker.example:80"}.encode();
  blob.insert(blob.end(), desc.begin(), desc.end());
  const auto marker = firmware::placeholder_bytes();
  blob.insert(blob.end(), marker.begin(), marker.end());
  blob.resize(8192, 0xdd);
  auto templ = firmware::make_runtime_template("rogue-runtime", std::move(blob));
  const auto key = crypto::generate_key(rng_);
  runtime_ = firmware::encode_container(firmware::sign_image(firmware::patch_image(templ, key), signing_));
}

net::Response RogueOtaServer::handle(const net::Request& req) {
  ++requests_;
  if (req.path == paths_.bootloader) {
    ++images_served_;
    return net::Response::ok(bootloader_);
  }
  if (req.path == paths_.erasure) {
    if (req.body.empty()) {
      Bytes seed(32);
      rng_.fill(seed);
      return net::Response::ok(std::move(seed));
    }
    return net::Response::text(200, "erasure verified");
  }
  if (req.path == paths_.runtime) {
    ++images_served_;
    return net::Response::ok(runtime_);
  }
  return net::Response::text(404, "not found");
}

}  // namespace faraday::sim
