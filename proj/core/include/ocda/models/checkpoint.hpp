#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocda/models/bundle.hpp"

namespace ocda::models {

inline constexpr char kCheckpointMagic[8] = {'O', 'C', 'D', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic, u32 version, u64 header length, JSON header (descriptor,
// meta, tensor directory of name/shape/offset), then little-endian f32
// payloads. Extras hold non-network tensors such as memory centroids.
struct Checkpoint {
  ModelBundle bundle;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> extras;

  const Tensor* extra(const std::string& name) const;
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

// Atomic write.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ocda::models
