#include "faraday/firmware.hpp"

#include <algorithm>

namespace faraday::firmware {

std::string_view to_string(ImageKind kind) {
  switch (kind) {
    case ImageKind::BootloaderStage: return "bootloader";
    case ImageKind::RuntimeTemplate: return "runtime-template";
    case ImageKind::RuntimePatched: return "runtime-patched";
  }
  return "unknown";
}

ByteView placeholder_bytes() {
  return ByteView(reinterpret_cast<const std::uint8_t*>(kKeyPlaceholder.data()), kKeyPlaceholder.size());
}

namespace {
constexpr std::string_view kDescriptorMagic = "NETDESC1";
}  // namespace

Bytes NetworkDescriptor::encode() const {
  ByteWriter w;
  w.raw(kDescriptorMagic);
  for (const auto* field : {&ssid, &passphrase, &server_address}) {
    if (field->size() > 0xffff) throw ImageError("network descriptor field too long");
    w.u16(static_cast<std::uint16_t>(field->size()));
    w.raw(*field);
  }
  return std::move(w).take();
}

std::optional<NetworkDescriptor> NetworkDescriptor::find_in(ByteView blob) {
  const ByteView magic(reinterpret_cast<const std::uint8_t*>(kDescriptorMagic.data()), kDescriptorMagic.size());
  for (auto off : find_all(blob, magic)) {
    try {
      ByteReader r(blob.subspan(off + magic.size()));
      NetworkDescriptor d;
      for (auto* field : {&d.ssid, &d.passphrase, &d.server_address}) {
        const auto n = r.u16();
        *field = faraday::to_string(r.raw(n));
      }
      return d;
    } catch (const DecodeError&) {
      continue;
    }
  }
  return std::nullopt;
}

namespace {

constexpr std::size_t kTrailerSize = kPubkeyTrailerMarker.size() + 32;

std::optional<crypto::VerifyingKey> read_trailer(ByteView blob) {
  if (blob.size() < kTrailerSize) return std::nullopt;
  auto tail = blob.subspan(blob.size() - kTrailerSize);
  if (!std::equal(kPubkeyTrailerMarker.begin(), kPubkeyTrailerMarker.end(), tail.begin())) {
    return std::nullopt;
  }
  crypto::VerifyingKey key;
  std::copy(tail.begin() + kPubkeyTrailerMarker.size(), tail.end(), key.bytes.begin());
  return key;
}

void check_offsets(const FirmwareImage& image) {
  auto offsets = image.placeholder_offsets;
  std::sort(offsets.begin(), offsets.end());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (offsets[i] + crypto::kKeySize > image.bytes.size()) {
      throw PatchError("placeholder offset " + std::to_string(offsets[i]) + " out of range");
    }
    if (i > 0 && offsets[i] < offsets[i - 1] + crypto::kKeySize) {
      throw PatchError("overlapping placeholder offsets " + std::to_string(offsets[i - 1]) + " and " +
                       std::to_string(offsets[i]));
    }
  }
}

}  // namespace

FirmwareImage make_runtime_template(std::string name, Bytes blob) {
  FirmwareImage img;
  img.name = std::move(name);
  img.kind = ImageKind::RuntimeTemplate;
  for (auto off : find_all(blob, placeholder_bytes())) img.placeholder_offsets.push_back(off);
  img.bytes = std::move(blob);
  if (img.placeholder_offsets.empty()) {
    throw ImageError("image '" + img.name + "' is not a provisioning template: no key placeholder");
  }
  validate_image(img);
  return img;
}

FirmwareImage make_bootloader_stage(std::string name, Bytes base,
                                    std::optional<crypto::VerifyingKey> pubkey) {
  FirmwareImage img;
  img.name = std::move(name);
  img.kind = ImageKind::BootloaderStage;
  img.bytes = std::move(base);
  if (pubkey) {
    img.bytes.insert(img.bytes.end(), kPubkeyTrailerMarker.begin(), kPubkeyTrailerMarker.end());
    img.bytes.insert(img.bytes.end(), pubkey->bytes.begin(), pubkey->bytes.end());
    img.embedded_pubkey = pubkey;
  }
  return img;
}

void validate_image(const FirmwareImage& image) {
  const auto hits = find_all(image.bytes, placeholder_bytes());
  switch (image.kind) {
    case ImageKind::BootloaderStage:
      if (!image.placeholder_offsets.empty()) throw ImageError("bootloader stage lists placeholder offsets");
      if (image.embedded_pubkey != read_trailer(image.bytes)) {
        throw ImageError("bootloader stage pubkey does not match its trailer");
      }
      break;
    case ImageKind::RuntimeTemplate: {
      if (image.placeholder_offsets.empty()) throw ImageError("template has no placeholder offsets");
      auto sorted = image.placeholder_offsets;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::uint64_t> found(hits.begin(), hits.end());
      if (sorted != found) throw ImageError("template placeholder offsets do not match its contents");
      if (image.embedded_pubkey) throw ImageError("template must not embed a pubkey");
      break;
    }
    case ImageKind::RuntimePatched:
      if (!hits.empty()) throw ImageError("patched image still contains the key placeholder");
      if (image.embedded_pubkey) throw ImageError("patched image must not embed a pubkey");
      break;
    default:
      throw ImageError("unknown image kind");
  }
}

FirmwareImage patch_image(const FirmwareImage& templ, const crypto::SecretKey& key) {
  if (templ.kind != ImageKind::RuntimeTemplate) {
    throw PatchError("image '" + templ.name + "' is not a provisioning template");
  }
  if (templ.placeholder_offsets.empty()) {
    throw PatchError("image '" + templ.name + "' has no key placeholder");
  }
  check_offsets(templ);
  const auto marker = placeholder_bytes();
  for (auto off : templ.placeholder_offsets) {
    if (!std::equal(marker.begin(), marker.end(), templ.bytes.begin() + static_cast<std::ptrdiff_t>(off))) {
      throw PatchError("no placeholder at offset " + std::to_string(off));
    }
  }

  FirmwareImage out = templ;
  out.kind = ImageKind::RuntimePatched;
  out.signature.reset();
  for (auto off : out.placeholder_offsets) {
    std::copy(key.view().begin(), key.view().end(), out.bytes.begin() + static_cast<std::ptrdiff_t>(off));
  }
  if (contains(out.bytes, marker)) {
    // Only possible if the template held an unlisted placeholder.
    throw PatchError("patched image still contains a placeholder");
  }
  return out;
}

crypto::SecretKey extract_key(ByteView blob, const std::vector<std::uint64_t>& offsets) {
  if (offsets.empty()) throw ImageError("no key offsets recorded");
  std::optional<crypto::SecretKey> key;
  for (auto off : offsets) {
    if (off + crypto::kKeySize > blob.size()) throw ImageError("key offset out of range");
    auto k = crypto::SecretKey::from_bytes(blob.subspan(off, crypto::kKeySize));
    if (key && !(*key == k)) throw ImageError("key occurrences disagree");
    key = k;
  }
  return *key;
}

namespace {
void write_body(ByteWriter& w, const FirmwareImage& image) {
  w.raw(kContainerMagic);
  w.u8(static_cast<std::uint8_t>(image.kind));
  w.u32(static_cast<std::uint32_t>(image.placeholder_offsets.size()));
  for (auto off : image.placeholder_offsets) w.u64(off);
  w.u64(image.bytes.size());
  w.raw(image.bytes);
}
}  // namespace

Bytes signing_payload(const FirmwareImage& image) {
  ByteWriter w;
  write_body(w, image);
  return std::move(w).take();
}

FirmwareImage sign_image(FirmwareImage image, const crypto::SigningKeyPair& keypair) {
  if (image.signature) throw ImageError("image '" + image.name + "' is already signed");
  image.signature = keypair.sign(signing_payload(image));
  return image;
}

bool verify_image(const FirmwareImage& image, const crypto::VerifyingKey& pubkey) {
  if (!image.signature) return false;
  return crypto::verify_signature(pubkey, signing_payload(image), *image.signature);
}

Bytes encode_container(const FirmwareImage& image) {
  ByteWriter w;
  write_body(w, image);
  if (image.signature) {
    if (image.signature->size() > 0xffff) throw ImageError("signature too long");
    w.u8(1);
    w.u16(static_cast<std::uint16_t>(image.signature->size()));
    w.raw(*image.signature);
  } else {
    w.u8(0);
  }
  return std::move(w).take();
}

FirmwareImage decode_container(ByteView container, std::string name) {
  ByteReader r(container);
  auto magic = r.raw(kContainerMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kContainerMagic.begin())) {
    throw DecodeError("not a firmware container");
  }
  FirmwareImage img;
  img.name = std::move(name);
  const auto kind = r.u8();
  if (kind < 1 || kind > 3) throw DecodeError("unknown image kind " + std::to_string(kind));
  img.kind = static_cast<ImageKind>(kind);
  const auto n = r.u32();
  if (n > r.remaining() / 8) throw DecodeError("offset count exceeds container size");
  img.placeholder_offsets.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) img.placeholder_offsets.push_back(r.u64());
  const auto len = r.u64();
  if (len > r.remaining()) throw DecodeError("blob length exceeds container size");
  auto blob = r.raw(static_cast<std::size_t>(len));
  img.bytes.assign(blob.begin(), blob.end());
  const auto has_sig = r.u8();
  if (has_sig > 1) throw DecodeError("bad signature presence flag");
  if (has_sig == 1) {
    const auto sig_len = r.u16();
    auto sig = r.raw(sig_len);
    img.signature = Bytes(sig.begin(), sig.end());
  }
  r.expect_done("firmware container");
  if (img.kind == ImageKind::BootloaderStage) img.embedded_pubkey = read_trailer(img.bytes);
  return img;
}

}  // namespace faraday::firmware
