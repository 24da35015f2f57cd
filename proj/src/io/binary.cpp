// SPDX-License-Identifier: Apache-2.0
#include "genpath/io/binary.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "genpath/errors.hpp"

namespace genpath::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void ByteWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  buf_.insert(buf_.end(), p, p + n);
}
void ByteWriter::u16(std::uint16_t v) { bytes(&v, sizeof v); }
void ByteWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void ByteWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void ByteWriter::f64(double v) { bytes(&v, sizeof v); }
void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw DataError(source_ + ": truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                    " more bytes, " + std::to_string(remaining()) + " left)");
  }
}

std::span<const unsigned char> ByteReader::take(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::seek(std::size_t offset) {
  if (offset > data_.size()) throw DataError(source_ + ": seek past end");
  pos_ = offset;
}

namespace {
template <typename T>
T read_pod(ByteReader& r) {
  T v;
  std::memcpy(&v, r.take(sizeof v).data(), sizeof v);
  return v;
}
}  // namespace

std::uint8_t ByteReader::u8() { return take(1)[0]; }
std::uint16_t ByteReader::u16() { return read_pod<std::uint16_t>(*this); }
std::uint32_t ByteReader::u32() { return read_pod<std::uint32_t>(*this); }
std::uint64_t ByteReader::u64() { return read_pod<std::uint64_t>(*this); }
double ByteReader::f64() { return read_pod<double>(*this); }
std::string ByteReader::str() {
  const std::uint32_t n = u32();
  auto s = take(n);
  return std::string(s.begin(), s.end());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace genpath::io
