#include "faraday/backend.hpp"

namespace faraday::backend {

namespace {

// Stand-in for compiled code: SHA-256 counter stream over the image name.
void append_filler(Bytes& blob, const std::string& label, std::size_t total_size) {
  std::uint64_t counter = 0;
  while (blob.size() < total_size) {
    ByteWriter w;
    w.raw(label);
    w.u64(counter++);
    const auto block = crypto::sha256(w.bytes());
    const auto n = std::min(block.size(), total_size - blob.size());
    blob.insert(blob.end(), block.begin(), block.begin() + static_cast<std::ptrdiff_t>(n));
  }
}

}  // namespace

firmware::FirmwareImage build_runtime_template(const std::string& name,
                                               const firmware::NetworkDescriptor& creds,
                                               std::size_t total_size) {
  Bytes blob = to_bytes("RUNTIME-IMAGE:" + name + "\n");
  const auto desc = creds.encode();
  blob.insert(blob.end(), desc.begin(), desc.end());
  const auto marker = firmware::placeholder_bytes();
  blob.insert(blob.end(), marker.begin(), marker.end());
  if (blob.size() > total_size) throw std::invalid_argument("runtime template size too small");
  append_filler(blob, "runtime-code:" + name, total_size);
  return firmware::make_runtime_template(name, std::move(blob));
}

firmware::FirmwareImage build_bootloader_base(const std::string& name, std::size_t total_size) {
  Bytes blob = to_bytes("OTA-BOOTLOADER:" + name + "\n");
  if (blob.size() > total_size) throw std::invalid_argument("bootloader size too small");
  append_filler(blob, "bootloader-code:" + name, total_size);
  return firmware::make_bootloader_stage(name, std::move(blob), std::nullopt);
}

}  // namespace faraday::backend
