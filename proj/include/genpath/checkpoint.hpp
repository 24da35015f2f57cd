// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint container shared by target models and generators.
//
// Layout (little-endian):
//   "GPCK"                      magic
//   u32 version                 currently 1
//   u32 len, bytes              kind ("target" or "generator")
//   u32 len, bytes              metadata, "key=value" lines
//   u32 count                   number of tensors, then per tensor:
//     u32 len, bytes            name
//     u32 rank, u64 dims[rank]
//     f64 values[prod(dims)]
//   u32 crc32                   over every preceding byte

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath {

struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws ConfigError if the file does not exist, DataError if it is
// truncated, has the wrong magic, or fails the checksum.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_target_model(const std::filesystem::path& path, const TargetModel& model);
// Rebuilds the named architecture and loads every parameter.
TargetModel load_target_model(const std::filesystem::path& path);

}  // namespace genpath
