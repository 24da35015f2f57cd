// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pathway mask file ("NPWY"), little-endian:
//   "NPWY"                 magic
//   u16 version            1
//   u32 layers
//   u32 c, h, w            per layer
//   payload                per layer, row-major bits packed LSB-first into
//                          bytes; each layer is padded to a whole byte
//   u32 crc32              over the payload bytes only

#include <filesystem>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath::io {

inline constexpr std::uint16_t kMaskFileVersion = 1;

// Throws ConfigError for a non-binary mask.
std::vector<unsigned char> encode_mask(const PathwayMask& mask);
// Throws DataError on bad magic, version, truncation or checksum.
PathwayMask decode_mask(std::span<const unsigned char> bytes, const std::string& source = "mask");

void write_mask_file(const std::filesystem::path& path, const PathwayMask& mask);
PathwayMask read_mask_file(const std::filesystem::path& path);

}  // namespace genpath::io
