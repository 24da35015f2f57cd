// SPDX-License-Identifier: Apache-2.0
#include "genpath/io/mask_file.hpp"

#include <zlib.h>

#include <cstring>

#include "genpath/errors.hpp"
#include "genpath/io/binary.hpp"

namespace genpath::io {

namespace {
constexpr char kMagic[4] = {'N', 'P', 'W', 'Y'};

std::uint32_t crc(std::span<const unsigned char> bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}
}  // namespace

std::vector<unsigned char> encode_mask(const PathwayMask& mask) {
  if (!mask.is_binary()) throw ConfigError("only finalized binary masks can be written to a mask file");
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kMaskFileVersion);
  w.u32(static_cast<std::uint32_t>(mask.num_layers()));
  for (const auto& t : mask.masks()) {
    if (t.rank() != 3) throw ShapeError("mask layers must be (c, h, w)");
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  }
  std::vector<unsigned char> payload;
  for (const auto& t : mask.masks()) {
    const std::size_t start = payload.size();
    payload.resize(start + (t.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (t[j] == 1.0) payload[start + j / 8] |= static_cast<unsigned char>(1u << (j % 8));
    }
  }
  w.bytes(payload.data(), payload.size());
  w.u32(crc(payload));
  return w.buffer();
}

PathwayMask decode_mask(std::span<const unsigned char> bytes, const std::string& source) {
  ByteReader r(bytes, source);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DataError(source + ": not a pathway mask file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kMaskFileVersion) throw DataError(source + ": unsupported mask file version " + std::to_string(version));
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 4096) throw DataError(source + ": implausible layer count " + std::to_string(layers));
  std::vector<Shape> shapes;
  std::size_t payload_size = 0;
  for (std::uint32_t i = 0; i < layers; ++i) {
    Shape s{r.u32(), r.u32(), r.u32()};
    payload_size += (numel(s) + 7) / 8;
    shapes.push_back(std::move(s));
  }
  const auto payload = r.take(payload_size);
  const std::uint32_t stored = r.u32();
  if (stored != crc(payload)) throw DataError(source + ": mask payload checksum mismatch");
  if (r.remaining() != 0) throw DataError(source + ": " + std::to_string(r.remaining()) + " trailing bytes");

  std::vector<Tensor> masks;
  std::size_t offset = 0;
  for (const Shape& s : shapes) {
    Tensor t(s);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = (payload[offset + j / 8] >> (j % 8)) & 1u ? 1.0 : 0.0;
    offset += (t.size() + 7) / 8;
    masks.push_back(std::move(t));
  }
  return PathwayMask(std::move(masks));
}

void write_mask_file(const std::filesystem::path& path, const PathwayMask& mask) { write_file(path, encode_mask(mask)); }

PathwayMask read_mask_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("mask file not found: " + path.string());
  return decode_mask(read_file(path), path.string());
}

}  // namespace genpath::io
