#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "svldl/model.hpp"

namespace svldl {

// Checkpoint layout, little-endian:
//   "SVLDL1" | u32 K | u32 L | u32 C_f | u32 hidden
//   then per tensor, in ModelParameters declaration order:
//   u32 rank | rank x u32 dims | prod(dims) x f64
std::vector<std::uint8_t> encode_checkpoint(const ModelParameters& params);
// Throws FormatError on bad magic, truncation, trailing bytes, or tensor
// shapes that disagree with the config block.
ModelParameters decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParameters& params);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace svldl
