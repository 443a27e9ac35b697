#include "faraday/erasure.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace faraday::erasure {

namespace {

void stream_block(const Seed& seed, std::uint64_t index, crypto::Digest& out) {
  std::array<std::uint8_t, 40> input{};
  std::copy(seed.begin(), seed.end(), input.begin());
  for (int i = 0; i < 8; ++i) input[32 + i] = static_cast<std::uint8_t>(index >> (56 - 8 * i));
  crypto_hash_sha256(out.data(), input.data(), input.size());
}

}  // namespace

Bytes ErasureProof::encode() const {
  Bytes out(challenge_seed.begin(), challenge_seed.end());
  out.insert(out.end(), proof_digest.begin(), proof_digest.end());
  return out;
}

ErasureProof ErasureProof::decode(ByteView wire) {
  if (wire.size() != 64) throw DecodeError("erasure proof must be 64 bytes");
  ErasureProof p;
  std::copy(wire.begin(), wire.begin() + 32, p.challenge_seed.begin());
  std::copy(wire.begin() + 32, wire.end(), p.proof_digest.begin());
  return p;
}

Seed erasure_challenge(crypto::RandomSource& rng, std::size_t memory_size) {
  if (memory_size == 0) throw std::invalid_argument("erasure challenge for zero-sized memory");
  Seed seed{};
  rng.fill(seed);
  return seed;
}

Bytes erasure_stream(const Seed& seed, std::size_t size) {
  Bytes out(size);
  crypto::Digest block{};
  for (std::size_t pos = 0, i = 0; pos < size; pos += block.size(), ++i) {
    stream_block(seed, i, block);
    const auto n = std::min(block.size(), size - pos);
    std::copy_n(block.begin(), n, out.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  return out;
}

ErasureProof erasure_prove(ByteView memory, const Seed& seed) {
  return ErasureProof{seed, crypto::sha256(memory)};
}

ErasureProof erasure_respond(std::span<std::uint8_t> memory, const Seed& seed) {
  const auto stream = erasure_stream(seed, memory.size());
  std::copy(stream.begin(), stream.end(), memory.begin());
  return erasure_prove(memory, seed);
}

bool erasure_verify(const ErasureProof& proof, const Seed& seed, std::size_t memory_size) {
  if (proof.challenge_seed != seed) return false;
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto::Digest block{};
  for (std::size_t pos = 0, i = 0; pos < memory_size; pos += block.size(), ++i) {
    stream_block(seed, i, block);
    crypto_hash_sha256_update(&st, block.data(), std::min(block.size(), memory_size - pos));
  }
  crypto::Digest expected{};
  crypto_hash_sha256_final(&st, expected.data());
  return sodium_memcmp(expected.data(), proof.proof_digest.data(), expected.size()) == 0;
}

}  // namespace faraday::erasure
