#pragma once

// Proof of secure erasure. The verifier sends a fresh 32-byte seed; the
// prover fills all of its writable memory with a keyed-hash counter-mode
// stream derived from the seed and returns the digest of that memory. With
// memory fully occupied by the stream there is no room to keep old content
// and still answer correctly.
//
// Stream block i = SHA-256(seed || u64_be(i)); blocks are concatenated and
// truncated to the memory size. Proof digest = SHA-256(memory).

#include <array>
#include <span>

#include "faraday/crypto.hpp"

namespace faraday::erasure {

using Seed = std::array<std::uint8_t, 32>;

struct ErasureProof {
  Seed challenge_seed{};
  crypto::Digest proof_digest{};

  /// seed (32) || digest (32)
  Bytes encode() const;
  static ErasureProof decode(ByteView wire);
  bool operator==(const ErasureProof&) const = default;
};

/// Throws std::invalid_argument for memory_size == 0 (a configuration error);
/// use erasure_verify's degenerate case only for explicit checks.
Seed erasure_challenge(crypto::RandomSource& rng, std::size_t memory_size);

Bytes erasure_stream(const Seed& seed, std::size_t size);

/// Overwrites memory with the stream and returns the proof.
ErasureProof erasure_respond(std::span<std::uint8_t> memory, const Seed& seed);

/// Proof over memory as it currently is (what a prover that skipped
/// overwriting part of its memory would send).
ErasureProof erasure_prove(ByteView memory, const Seed& seed);

bool erasure_verify(const ErasureProof& proof, const Seed& seed, std::size_t memory_size);

}  // namespace faraday::erasure
