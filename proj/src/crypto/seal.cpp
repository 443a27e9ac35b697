#include <sodium.h>

#include "faraday/crypto.hpp"

namespace faraday::crypto {

static_assert(kNonceSize == crypto_aead_chacha20poly1305_IETF_NPUBBYTES);
static_assert(kTagSize == crypto_aead_chacha20poly1305_IETF_ABYTES);
static_assert(kKeySize == crypto_aead_chacha20poly1305_IETF_KEYBYTES);

std::array<std::uint8_t, kNonceSize> Nonce::bytes() const {
  ByteWriter w;
  w.u32(boot_counter);
  w.u64(msg_counter);
  std::array<std::uint8_t, kNonceSize> out{};
  std::copy(w.bytes().begin(), w.bytes().end(), out.begin());
  return out;
}

Nonce Nonce::from_bytes(ByteView b) {
  if (b.size() != kNonceSize) throw DecodeError("nonce must be 12 bytes");
  ByteReader r(b);
  Nonce n;
  n.boot_counter = r.u32();
  n.msg_counter = r.u64();
  return n;
}

Bytes SealedMessage::serialize() const {
  ByteWriter w;
  w.raw(identity.digest);
  w.raw(nonce);
  w.blob(ciphertext);
  return std::move(w).take();
}

SealedMessage SealedMessage::parse(ByteView wire) {
  ByteReader r(wire);
  SealedMessage m;
  m.identity.digest = r.fixed<kDigestSize>();
  m.nonce = r.fixed<kNonceSize>();
  m.ciphertext = r.blob();
  r.expect_done("sealed message");
  if (m.ciphertext.size() < kTagSize) throw DecodeError("sealed message: ciphertext shorter than tag");
  return m;
}

SealedMessage seal(ByteView payload, const SecretKey& key, const Nonce& nonce) {
  SealedMessage m;
  m.identity = derive_identity(key);
  m.nonce = nonce.bytes();
  m.ciphertext.resize(payload.size() + kTagSize);
  unsigned long long len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(m.ciphertext.data(), &len, payload.data(), payload.size(),
                                            m.identity.digest.data(), m.identity.digest.size(),
                                            nullptr, m.nonce.data(), key.view().data());
  m.ciphertext.resize(len);
  return m;
}

Bytes open(const SealedMessage& msg, const SecretKey& key) {
  if (msg.ciphertext.size() < kTagSize) throw AuthError("ciphertext shorter than tag");
  Bytes plain(msg.ciphertext.size() - kTagSize);
  unsigned long long len = 0;
  const int rc = crypto_aead_chacha20poly1305_ietf_decrypt(
      plain.data(), &len, nullptr, msg.ciphertext.data(), msg.ciphertext.size(),
      msg.identity.digest.data(), msg.identity.digest.size(), msg.nonce.data(), key.view().data());
  if (rc != 0) throw AuthError("message authentication failed");
  plain.resize(len);
  return plain;
}

Bytes wrap(ByteView plaintext, ByteView wrapping_key, RandomSource& rng) {
  if (wrapping_key.size() != kKeySize) throw std::invalid_argument("wrapping key must be 32 bytes");
  Bytes out(kNonceSize + plaintext.size() + kTagSize);
  rng.fill(std::span(out.data(), kNonceSize));
  unsigned long long len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + kNonceSize, &len, plaintext.data(),
                                            plaintext.size(), nullptr, 0, nullptr, out.data(),
                                            wrapping_key.data());
  return out;
}

Bytes unwrap(ByteView wrapped, ByteView wrapping_key) {
  if (wrapping_key.size() != kKeySize) throw std::invalid_argument("wrapping key must be 32 bytes");
  if (wrapped.size() < kNonceSize + kTagSize) throw AuthError("wrapped blob too short");
  Bytes plain(wrapped.size() - kNonceSize - kTagSize);
  unsigned long long len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &len, nullptr, wrapped.data() + kNonceSize,
                                                wrapped.size() - kNonceSize, nullptr, 0,
                                                wrapped.data(), wrapping_key.data()) != 0) {
    throw AuthError("unwrap failed: wrong device key or corrupted state");
  }
  plain.resize(len);
  return plain;
}

}  // namespace faraday::crypto
