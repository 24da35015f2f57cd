// SPDX-License-Identifier: Apache-2.0
#include "genpath/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "genpath/architectures.hpp"
#include "genpath/errors.hpp"
#include "genpath/io/binary.hpp"

namespace genpath {

namespace {
constexpr char kMagic[4] = {'G', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string encode_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += k + "=" + v + "\n";
  return out;
}

std::map<std::string, std::string> decode_meta(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}
}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor named " + name);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.str(checkpoint.kind);
  w.str(encode_meta(checkpoint.meta));
  w.u32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.values()) w.f64(v);
  }
  const auto crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(w.buffer().data()),
                         static_cast<uInt>(w.buffer().size()));
  w.u32(static_cast<std::uint32_t>(crc));
  io::write_file(path, w.buffer());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  const std::vector<unsigned char> bytes = io::read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  io::ByteReader tail(bytes, path.string());
  tail.seek(body);
  const std::uint32_t stored = tail.u32();
  const auto crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(body)));
  if (crc != stored) throw DataError(path.string() + ": checkpoint checksum mismatch");

  io::ByteReader r(std::span(bytes.data(), body), path.string());
  r.skip(4);
  if (const auto v = r.u32(); v != kVersion) throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  Checkpoint out;
  out.kind = r.str();
  out.meta = decode_meta(r.str());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError(path.string() + ": tensor " + name + " has implausible rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.u64()));
    const std::size_t n = numel(shape);
    if (n * 8 > r.remaining()) throw DataError(path.string() + ": truncated tensor " + name);
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    out.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void save_target_model(const std::filesystem::path& path, const TargetModel& model) {
  Checkpoint ck;
  ck.kind = "target";
  ck.meta["architecture"] = model.architecture();
  ck.meta["num_classes"] = std::to_string(model.num_classes());
  ck.tensors = model.named_tensors();
  write_checkpoint(path, ck);
}

TargetModel load_target_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.kind != "target") throw ConfigError(path.string() + " is a '" + ck.kind + "' checkpoint, not a target model");
  const auto arch = ck.meta.find("architecture");
  const auto classes = ck.meta.find("num_classes");
  if (arch == ck.meta.end() || classes == ck.meta.end()) throw DataError(path.string() + ": missing model metadata");
  TargetModel model = make_architecture(arch->second, std::stoul(classes->second), 0);
  const auto expected = model.named_tensors();
  if (expected.size() != ck.tensors.size()) {
    throw DataError(path.string() + ": expected " + std::to_string(expected.size()) + " tensors, found " +
                    std::to_string(ck.tensors.size()));
  }
  for (const auto& [name, t] : ck.tensors) model.assign(name, t);
  return model;
}

}  // namespace genpath
