// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian byte buffers for the binary file formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace genpath::io {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  // u32 length prefix followed by the raw bytes
  void str(const std::string& s);

  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

// Reads fail with DataError naming `source` and the offset.
class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> data, std::string source) : data_(data), source_(std::move(source)) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::span<const unsigned char> take(std::size_t n);
  void skip(std::size_t n) { take(n); }
  void seek(std::size_t offset);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const unsigned char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace genpath::io
