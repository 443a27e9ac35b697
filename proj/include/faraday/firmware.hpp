#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faraday/crypto.hpp"

namespace faraday::firmware {

enum class ImageKind : std::uint8_t {
  BootloaderStage = 1,
  RuntimeTemplate = 2,
  RuntimePatched = 3,
};

std::string_view to_string(ImageKind kind);

/// Marker the build system leaves where a node key belongs. Exactly 32 bytes.
inline constexpr std::string_view kKeyPlaceholder = "KEY_PLACEHOLDER_0123456789ABCDEF";
static_assert(kKeyPlaceholder.size() == crypto::kKeySize);

inline constexpr std::string_view kContainerMagic = "FARADAYFWIMAGE01";
static_assert(kContainerMagic.size() == 16);

/// A bootloader stage carries the Box verifying key as an 8-byte marker
/// followed by the 32 key bytes at the very end of its blob.
inline constexpr std::string_view kPubkeyTrailerMarker = "BOXPUBK1";

class PatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FirmwareImage {
  std::string name;
  ImageKind kind = ImageKind::RuntimeTemplate;
  Bytes bytes;
  std::vector<std::uint64_t> placeholder_offsets;
  std::optional<crypto::VerifyingKey> embedded_pubkey;
  std::optional<Bytes> signature;

  bool operator==(const FirmwareImage&) const = default;
};

ByteView placeholder_bytes();

/// Backend network parameters compiled into runtime images. Serialized as
/// "NETDESC1" followed by three u16-length-prefixed strings.
struct NetworkDescriptor {
  std::string ssid;
  std::string passphrase;
  std::string server_address;

  Bytes encode() const;
  /// First descriptor embedded in blob, if any.
  static std::optional<NetworkDescriptor> find_in(ByteView blob);
  bool operator==(const NetworkDescriptor&) const = default;
};

/// Builds a template and records every placeholder position found in blob.
/// Throws ImageError if the blob contains none.
FirmwareImage make_runtime_template(std::string name, Bytes blob);

/// Appends the verifying-key trailer when a key is given.
FirmwareImage make_bootloader_stage(std::string name, Bytes base,
                                    std::optional<crypto::VerifyingKey> pubkey);

/// Checks the per-kind invariants; throws ImageError.
void validate_image(const FirmwareImage& image);

/// Copy of the template with the key written at every placeholder offset.
/// Throws PatchError for non-templates, missing/misplaced/overlapping
/// placeholders.
FirmwareImage patch_image(const FirmwareImage& templ, const crypto::SecretKey& key);

/// Reads the key back out of a patched blob at the recorded offsets.
/// Throws ImageError if the offsets disagree about the key.
crypto::SecretKey extract_key(ByteView blob, const std::vector<std::uint64_t>& offsets);

/// Bytes covered by the signature: the container without its signature block.
Bytes signing_payload(const FirmwareImage& image);

/// Throws ImageError if the image already carries a signature.
FirmwareImage sign_image(FirmwareImage image, const crypto::SigningKeyPair& keypair);

/// False for unsigned images and malformed signatures.
bool verify_image(const FirmwareImage& image, const crypto::VerifyingKey& pubkey);

/// magic(16) | kind(1) | n(4) | offsets(8 each) | blob_len(8) | blob |
/// sig_present(1) [| sig_len(2) | sig]
Bytes encode_container(const FirmwareImage& image);
FirmwareImage decode_container(ByteView container, std::string name = {});

}  // namespace faraday::firmware
