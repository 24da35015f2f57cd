// SPDX-License-Identifier: Apache-2.0
#include "genpath/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "genpath/errors.hpp"
#include "genpath/io/binary.hpp"
#include "genpath/io/image.hpp"

namespace genpath::io {

namespace {

constexpr std::size_t kBlobSide = 16;
constexpr std::size_t kBlobRecord = 1 + 3 * kBlobSide * kBlobSide;

void normalize_in_place(Dataset& d) {
  const std::size_t n = d.images.dim(0), c = d.images.dim(1), hw = d.images.dim(2) * d.images.dim(3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      double* p = d.images.data() + (i * c + k) * hw;
      for (std::size_t j = 0; j < hw; ++j) p[j] = (p[j] - d.mean[k]) / d.stddev[k];
    }
  }
}

// Planar uint8 records (label byte first) to a dataset scaled to [0, 1].
Dataset from_records(const std::vector<unsigned char>& bytes, std::size_t record, std::size_t channels,
                     std::size_t side, const std::string& name) {
  const std::size_t n = bytes.size() / record;
  Dataset d;
  d.name = name;
  d.images = Tensor({n, channels, side, side});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* r = bytes.data() + i * record;
    d.labels[i] = r[0];
    for (std::size_t j = 0; j + 1 < record; ++j) d.images[i * (record - 1) + j] = r[1 + j] / 255.0;
  }
  return d;
}

void truncate(Dataset& d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return;
  const Shape& s = d.images.shape();
  std::vector<double> v(d.images.data(), d.images.data() + limit * s[1] * s[2] * s[3]);
  d.images = Tensor({limit, s[1], s[2], s[3]}, std::move(v));
  d.labels.resize(limit);
}

Dataset load_cifar(const DatasetSpec& spec) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(spec.path)) {
    if (spec.split == "train") {
      for (int b = 1; b <= 5; ++b) files.push_back(spec.path / ("data_batch_" + std::to_string(b) + ".bin"));
    } else {
      files.push_back(spec.path / "test_batch.bin");
    }
  } else {
    files.push_back(spec.path);
  }
  std::vector<unsigned char> all;
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw ConfigError("CIFAR-10 file not found: " + f.string());
    const auto bytes = read_file(f);
    Dataset probe = parse_cifar10(bytes, f.string());  // validates framing
    (void)probe;
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  Dataset d = parse_cifar10(all, spec.path.string());
  truncate(d, spec.limit);
  return d;
}

Dataset load_imagedir(const DatasetSpec& spec) {
  const auto index = spec.path / "labels.txt";
  std::ifstream in(index);
  if (!in) throw ConfigError("image directory needs " + index.string());
  std::vector<Tensor> images;
  Dataset d;
  d.name = "imagedir";
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string file;
    int label = -1;
    if (!(ls >> file >> label) || label < 0) {
      throw DataError(index.string() + ":" + std::to_string(lineno) + ": expected '<file> <label>'");
    }
    Tensor t = to_tensor(read_pnm(spec.path / file));
    if (t.dim(0) == 1) {
      Tensor rgb({3, t.dim(1), t.dim(2)});
      for (std::size_t c = 0; c < 3; ++c) std::copy(t.values().begin(), t.values().end(), rgb.data() + c * t.size());
      t = std::move(rgb);
    }
    images.push_back(resize_bilinear(t, spec.resolution, spec.resolution));
    d.labels.push_back(label);
    if (spec.limit && d.labels.size() == spec.limit) break;
  }
  if (images.empty()) throw DataError(index.string() + " lists no images");
  d.images = Tensor::stack(images);
  d.num_classes = static_cast<std::size_t>(*std::max_element(d.labels.begin(), d.labels.end())) + 1;
  d.mean = {0.5, 0.5, 0.5};
  d.stddev = {0.5, 0.5, 0.5};
  normalize_in_place(d);
  return d;
}

}  // namespace

Tensor Dataset::denormalize(const Tensor& chw) const {
  Tensor out = chw;
  const std::size_t c = chw.dim(0), hw = chw.size() / c;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < hw; ++j) out[k * hw + j] = chw[k * hw + j] * stddev[k] + mean[k];
  }
  return out;
}

Dataset parse_cifar10(const std::vector<unsigned char>& bytes, const std::string& source) {
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t whole = bytes.size() / kCifarRecordBytes;
    throw DataError(source + ": " + std::to_string(bytes.size()) + " bytes is not a whole number of " +
                    std::to_string(kCifarRecordBytes) + "-byte records; record " + std::to_string(whole) +
                    " starts at byte " + std::to_string(whole * kCifarRecordBytes) + " and is truncated after " +
                    std::to_string(bytes.size() - whole * kCifarRecordBytes) + " bytes");
  }
  Dataset d = from_records(bytes, kCifarRecordBytes, 3, 32, "cifar10");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] > 9) {
      throw DataError(source + ": record " + std::to_string(i) + " has label " + std::to_string(d.labels[i]));
    }
  }
  d.num_classes = 10;
  d.mean = {0.4914, 0.4822, 0.4465};
  d.stddev = {0.2470, 0.2435, 0.2616};
  normalize_in_place(d);
  return d;
}

std::vector<unsigned char> two_blob_bytes(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<unsigned char> out(count * kBlobRecord);
  const double half = kBlobSide / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char* r = out.data() + i * kBlobRecord;
    const int label = unit(rng) < 0.5 ? 0 : 1;
    r[0] = static_cast<unsigned char>(label);
    // blob center inside its half, away from the border
    const double cx = (label == 0 ? 0.0 : half) + 2.0 + unit(rng) * (half - 4.0);
    const double cy = 2.0 + unit(rng) * (kBlobSide - 4.0);
    const double radius = 1.5 + unit(rng) * 1.5;
    double color[3];
    for (double& c : color) c = 0.5 + 0.5 * unit(rng);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < kBlobSide; ++y) {
        for (std::size_t x = 0; x < kBlobSide; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
          const double blob = std::exp(-(dx * dx + dy * dy) / (2 * radius * radius));
          const double v = std::clamp(0.1 * unit(rng) + color[c] * blob, 0.0, 1.0);
          r[1 + (c * kBlobSide + y) * kBlobSide + x] = static_cast<unsigned char>(std::lround(v * 255));
        }
      }
    }
  }
  return out;
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.split != "train" && spec.split != "test") throw ConfigError("split must be train or test, got " + spec.split);
  if (spec.name == "cifar10") return load_cifar(spec);
  if (spec.name == "imagedir") return load_imagedir(spec);
  if (spec.name == "two-blob") {
    const std::size_t count =
        spec.limit ? spec.limit : (spec.split == "train" ? kTwoBlobDefaultTrain : kTwoBlobDefaultTest);
    // the two splits are disjoint streams of the same generator
    const std::uint64_t seed = spec.seed * 2 + (spec.split == "train" ? 0 : 1);
    Dataset d = from_records(two_blob_bytes(count, seed), kBlobRecord, 3, kBlobSide, "two-blob");
    d.num_classes = 2;
    d.mean = {0.5, 0.5, 0.5};
    d.stddev = {0.5, 0.5, 0.5};
    normalize_in_place(d);
    return d;
  }
  throw ConfigError("unknown dataset '" + spec.name + "' (expected cifar10, imagedir or two-blob)");
}

}  // namespace genpath::io
