#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ronet/weights.hpp"

namespace ronet {

// Layout (all integers little-endian):
//   "RONETCK1" | u32 version | u32 count |
//   count x { u32 name_len | name (UTF-8) | u8 rank | rank x u32 dim |
//             numel x f32 }
inline constexpr char kCheckpointMagic[8] = {'R', 'O', 'N', 'E', 'T', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelWeights& weights);
// Throws CheckpointError on bad magic, unknown version, truncation, trailing
// bytes or duplicate names; nothing is returned in that case.
ModelWeights deserialize_checkpoint(const std::string& bytes);

// Writes through a temporary sibling file that is renamed into place.
void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_checkpoint(const std::filesystem::path& path);

}  // namespace ronet
