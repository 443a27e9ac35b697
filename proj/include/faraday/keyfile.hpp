#pragma once

#include <vector>

#include "faraday/crypto.hpp"

namespace faraday::keyfile {

struct Entry {
  crypto::KeyIdentity identity;
  crypto::SecretKey key;
};

/// u32 BE count, then per record identity (32) || key (32).
Bytes encode(const std::vector<Entry>& entries);

/// Rejects truncated files and records whose identity is not the digest of
/// their key.
std::vector<Entry> decode(ByteView file);

}  // namespace faraday::keyfile
