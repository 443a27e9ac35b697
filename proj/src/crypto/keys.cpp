#include <sodium.h>

#include <cstring>
#include <limits>

#include "faraday/crypto.hpp"

namespace faraday::crypto {

namespace {
void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}
}  // namespace

std::uint64_t RandomSource::next_u64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t RandomSource::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform: bound must be > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = 0;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

SystemRandom::SystemRandom() { ensure_sodium(); }

void SystemRandom::fill(std::span<std::uint8_t> out) { randombytes_buf(out.data(), out.size()); }

SeededRandom::SeededRandom(std::uint64_t seed) : SeededRandom(seed, "default") {}

SeededRandom::SeededRandom(std::uint64_t seed, std::string_view stream_label) {
  ensure_sodium();
  ByteWriter w;
  w.raw("faraday-seeded-rng");
  w.u64(seed);
  w.raw(stream_label);
  key_ = sha256(w.bytes());
}

void SeededRandom::refill() {
  static const std::array<std::uint8_t, crypto_stream_chacha20_IETF_NONCEBYTES> kNonce{};
  block_.fill(0);
  crypto_stream_chacha20_ietf_xor_ic(block_.data(), block_.data(), block_.size(), kNonce.data(),
                                     counter_++, key_.data());
  used_ = 0;
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  for (auto& b : out) {
    if (used_ == block_.size()) refill();
    b = block_[used_++];
  }
}

Digest sha256(ByteView data) {
  ensure_sodium();
  Digest d{};
  crypto_hash_sha256(d.data(), data.data(), data.size());
  return d;
}

SecretKey::~SecretKey() { sodium_memzero(bytes_.data(), bytes_.size()); }

SecretKey SecretKey::from_bytes(ByteView bytes) {
  if (bytes.size() != kKeySize) throw std::invalid_argument("secret key must be 32 bytes");
  SecretKey k;
  std::memcpy(k.bytes_.data(), bytes.data(), kKeySize);
  return k;
}

bool SecretKey::operator==(const SecretKey& other) const {
  return sodium_memcmp(bytes_.data(), other.bytes_.data(), kKeySize) == 0;
}

KeyIdentity KeyIdentity::from_hex(std::string_view hex) {
  const auto raw = faraday::from_hex(hex);
  if (raw.size() != kDigestSize) throw DecodeError("identity must be 32 bytes");
  KeyIdentity id;
  std::copy(raw.begin(), raw.end(), id.digest.begin());
  return id;
}

SecretKey generate_key(RandomSource& rng) {
  std::array<std::uint8_t, kKeySize> raw{};
  rng.fill(raw);
  auto key = SecretKey::from_bytes(raw);
  sodium_memzero(raw.data(), raw.size());
  return key;
}

KeyIdentity derive_identity(const SecretKey& key) { return KeyIdentity{sha256(key.view())}; }

SigningKeyPair SigningKeyPair::generate(RandomSource& rng) {
  std::array<std::uint8_t, 32> seed{};
  rng.fill(seed);
  auto kp = from_seed(seed);
  sodium_memzero(seed.data(), seed.size());
  return kp;
}

SigningKeyPair SigningKeyPair::from_seed(ByteView seed) {
  ensure_sodium();
  if (seed.size() != crypto_sign_SEEDBYTES) throw std::invalid_argument("signing seed must be 32 bytes");
  SigningKeyPair kp;
  std::memcpy(kp.seed_.data(), seed.data(), seed.size());
  crypto_sign_seed_keypair(kp.public_.bytes.data(), kp.secret_.data(), kp.seed_.data());
  return kp;
}

SigningKeyPair::~SigningKeyPair() {
  sodium_memzero(seed_.data(), seed_.size());
  sodium_memzero(secret_.data(), secret_.size());
}

Bytes SigningKeyPair::sign(ByteView message) const {
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
  return sig;
}

bool verify_signature(const VerifyingKey& key, ByteView message, ByteView signature) {
  ensure_sodium();
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     key.bytes.data()) == 0;
}

}  // namespace faraday::crypto
