#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "faraday/bytes.hpp"

namespace faraday::crypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;

using Digest = std::array<std::uint8_t, kDigestSize>;

/// Message authentication failed or a credential did not match.
class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Source of random bytes. Implementations must be usable from one thread at
/// a time; callers serialize access.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::uint64_t next_u64();
  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
};

/// Operating-system CSPRNG.
class SystemRandom final : public RandomSource {
 public:
  SystemRandom();
  void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic ChaCha20 keystream keyed by SHA-256 of the seed. Used by the
/// simulator so that runs are reproducible.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed);
  SeededRandom(std::uint64_t seed, std::string_view stream_label);
  void fill(std::span<std::uint8_t> out) override;

 private:
  void refill();

  std::array<std::uint8_t, 32> key_{};
  std::array<std::uint8_t, 64> block_{};
  std::size_t used_ = 64;
  std::uint32_t counter_ = 0;
};

Digest sha256(ByteView data);

/// 32-byte symmetric key. Deliberately has no stream operator; the bytes are
/// wiped on destruction.
class SecretKey {
 public:
  SecretKey() = default;
  SecretKey(const SecretKey&) = default;
  SecretKey& operator=(const SecretKey&) = default;
  ~SecretKey();

  static SecretKey from_bytes(ByteView bytes);

  ByteView view() const { return bytes_; }
  /// Equality runs in constant time.
  bool operator==(const SecretKey& other) const;

 private:
  std::array<std::uint8_t, kKeySize> bytes_{};
};

struct KeyIdentity {
  Digest digest{};

  std::string hex() const { return to_hex(digest); }
  static KeyIdentity from_hex(std::string_view hex);
  auto operator<=>(const KeyIdentity&) const = default;
};

SecretKey generate_key(RandomSource& rng);

/// SHA-256 of the key bytes.
KeyIdentity derive_identity(const SecretKey& key);

struct VerifyingKey {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const VerifyingKey&) const = default;
};

/// Ed25519 key pair. Persisted as its 32-byte seed only.
class SigningKeyPair {
 public:
  static SigningKeyPair generate(RandomSource& rng);
  static SigningKeyPair from_seed(ByteView seed);

  const VerifyingKey& verifying_key() const { return public_; }
  ByteView seed() const { return seed_; }
  Bytes sign(ByteView message) const;

  SigningKeyPair(const SigningKeyPair&) = default;
  SigningKeyPair& operator=(const SigningKeyPair&) = default;
  ~SigningKeyPair();

 private:
  SigningKeyPair() = default;

  std::array<std::uint8_t, 32> seed_{};
  std::array<std::uint8_t, 64> secret_{};
  VerifyingKey public_{};
};

/// False on malformed signatures rather than throwing.
bool verify_signature(const VerifyingKey& key, ByteView message, ByteView signature);

/// AEAD nonce built from the node boot counter and per-boot message counter.
struct Nonce {
  std::uint32_t boot_counter = 0;
  std::uint64_t msg_counter = 0;

  std::array<std::uint8_t, kNonceSize> bytes() const;
  static Nonce from_bytes(ByteView b);
  auto operator<=>(const Nonce&) const = default;
};

struct SealedMessage {
  KeyIdentity identity;
  std::array<std::uint8_t, kNonceSize> nonce{};
  Bytes ciphertext;  // includes the 16-byte tag

  /// identity (32) || nonce (12) || u32 BE length || ciphertext+tag
  Bytes serialize() const;
  static SealedMessage parse(ByteView wire);
};

/// ChaCha20-Poly1305 (IETF) with the identity header bound as associated data.
SealedMessage seal(ByteView payload, const SecretKey& key, const Nonce& nonce);

/// Throws AuthError if the ciphertext, tag, nonce or identity header were
/// altered or the key is wrong.
Bytes open(const SealedMessage& msg, const SecretKey& key);

/// Key-at-rest wrapping for the Box state file (random nonce prefix).
Bytes wrap(ByteView plaintext, ByteView wrapping_key, RandomSource& rng);
Bytes unwrap(ByteView wrapped, ByteView wrapping_key);

}  // namespace faraday::crypto
