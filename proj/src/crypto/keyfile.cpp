#include "faraday/keyfile.hpp"

namespace faraday::keyfile {

Bytes encode(const std::vector<Entry>& entries) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.raw(e.identity.digest);
    w.raw(e.key.view());
  }
  return std::move(w).take();
}

std::vector<Entry> decode(ByteView file) {
  ByteReader r(file);
  const auto count = r.u32();
  if (count > r.remaining() / 64) throw DecodeError("key file: count exceeds payload");
  std::vector<Entry> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e{{r.fixed<32>()}, crypto::SecretKey::from_bytes(r.raw(32))};
    if (crypto::derive_identity(e.key) != e.identity) {
      throw DecodeError("key file: record " + std::to_string(i) + " identity mismatch");
    }
    out.push_back(std::move(e));
  }
  r.expect_done("key file");
  return out;
}

}  // namespace faraday::keyfile
