// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset ingestion. Three sources are supported:
//   cifar10   CIFAR-10 binary batches: 3073-byte records, one label byte then
//             1024 red, 1024 green and 1024 blue bytes
//   imagedir  a directory of PPM/PGM files with a `labels.txt` index of
//             "<file> <label>" lines, resized to a fixed resolution
//   two-blob  a seeded synthetic 2-class set of 3x16x16 images with one
//             bright blob in the left (class 0) or right (class 1) half
// Images are scaled to [0, 1] and normalized per channel with the constants
// recorded in the Dataset.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genpath/tensor.hpp"

namespace genpath::io {

struct DatasetSpec {
  std::string name;  // cifar10 | imagedir | two-blob
  std::filesystem::path path;
  std::string split = "test";  // train | test
  std::size_t limit = 0;       // 0: everything (two-blob: default count)
  std::uint64_t seed = 0;      // two-blob only
  std::size_t resolution = 32;  // imagedir only
};

struct Dataset {
  std::string name;
  Tensor images;  // (n, c, h, w), normalized
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<double> mean, stddev;  // per channel

  std::size_t size() const { return labels.size(); }
  // Inverse of the normalization, back to [0, 1].
  Tensor denormalize(const Tensor& chw) const;
};

Dataset load_dataset(const DatasetSpec& spec);

inline constexpr std::size_t kCifarRecordBytes = 3073;
// Parses concatenated CIFAR-10 records. A byte count that is not a multiple
// of the record size fails with a diagnostic naming the record boundary.
Dataset parse_cifar10(const std::vector<unsigned char>& bytes, const std::string& source);

// Raw two-blob stream: per sample one label byte then 768 planar RGB bytes.
std::vector<unsigned char> two_blob_bytes(std::size_t count, std::uint64_t seed);
inline constexpr std::size_t kTwoBlobDefaultTrain = 512;
inline constexpr std::size_t kTwoBlobDefaultTest = 256;

}  // namespace genpath::io
