#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "metalgan/networks.hpp"

namespace metalgan {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Everything needed to resume or run inference: both configs, both parameter
/// sets (float32 on disk and in memory), sampler state and the epoch counter.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointFormatVersion;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  ParameterSet<float> generator_params;
  ParameterSet<float> discriminator_params;
  std::string rng_state;
  std::uint64_t epoch = 0;

  bool operator==(const Checkpoint&) const = default;
};

/// Container layout: magic "MGANCKPT", u32 version, u64 header length, JSON
/// header (configs, epoch, rng state, array names and shapes), then raw
/// little-endian float32 payload in header order.
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Bytes of the parameter payload only (no header).
std::string checkpoint_payload(const Checkpoint& ck);

/// FNV-1a 64-bit digest, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace metalgan
