// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "genpath/architectures.hpp"
#include "genpath/checkpoint.hpp"
#include "genpath/errors.hpp"
#include "genpath/io/binary.hpp"
#include "genpath/io/config.hpp"
#include "genpath/io/dataset.hpp"
#include "genpath/io/image.hpp"
#include "genpath/io/mask_file.hpp"
#include "support/fixtures.hpp"

using namespace genpath;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32_oracle(const unsigned char* p, std::size_t n) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= p[i];
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

TEST_CASE("mask file layout") {
  const std::vector<LayerSpec> specs{{1, 1, 3}, {1, 2, 5}};
  const PathwayMask m = PathwayMask::unflatten(std::vector<double>{1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1}, specs);
  const auto bytes = io::encode_mask(m);
  // header 4 + 2 + 4 + 2 * 12, payload 1 + 2, crc 4
  REQUIRE(bytes.size() == 34 + 3 + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NPWY");
  CHECK(bytes[4] == 1);
  CHECK(bytes[34] == 0b101);
  CHECK(bytes[35] == 0b11);
  CHECK(bytes[36] == 0b10);
  CHECK(le32(bytes.data() + 37) == crc32_oracle(bytes.data() + 34, 3));
  CHECK(io::decode_mask(bytes) == m);
}

TEST_CASE("mask file round trips and rejects damage") {
  const auto dir = fixtures::scratch_dir("masks");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::vector<LayerSpec> specs{{1 + seed % 4, 1 + seed % 5, 3}, {2, 3, 1 + seed % 7}};
    const PathwayMask m = fixtures::random_binary_mask(specs, 0.3 + 0.01 * seed, seed);
    io::write_mask_file(dir / "m.npwy", m);
    const PathwayMask back = io::read_mask_file(dir / "m.npwy");
    CHECK(back == m);
    CHECK(back.firing_sparsity() == m.firing_sparsity());
  }
  const PathwayMask m = fixtures::random_binary_mask({{3, 4, 4}}, 0.5, 9);
  const auto good = io::encode_mask(m);
  auto corrupt = good;
  corrupt[good.size() - 6] ^= 0x10;
  CHECK_THROWS_AS(io::decode_mask(corrupt), DataError);
  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_mask(magic), DataError);
  auto version = good;
  version[4] = 9;
  CHECK_THROWS_AS(io::decode_mask(version), DataError);
  CHECK_THROWS_AS(io::decode_mask(std::span(good).first(good.size() - 1)), DataError);
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(io::decode_mask(trailing), DataError);
  std::vector<Tensor> soft{Tensor({1, 1, 2}, std::vector<double>{0.5, 1})};
  CHECK_THROWS_AS(io::encode_mask(PathwayMask(soft)), ConfigError);
  CHECK_THROWS_AS(io::read_mask_file(dir / "absent.npwy"), ConfigError);
}

TEST_CASE("checkpoints round trip bit-exactly and detect corruption") {
  const auto dir = fixtures::scratch_dir("ckpt");
  const TargetModel m = fixtures::tiny3(3);
  Checkpoint ck;
  ck.kind = "target";
  ck.meta["architecture"] = "tiny";
  ck.tensors = m.named_tensors();
  write_checkpoint(dir / "a.gpck", ck);
  const Checkpoint back = read_checkpoint(dir / "a.gpck");
  CHECK(back.kind == "target");
  CHECK(back.meta == ck.meta);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) CHECK(back.tensors[i] == ck.tensors[i]);

  auto bytes = io::read_file(dir / "a.gpck");
  bytes[bytes.size() / 2] ^= 1;
  io::write_file(dir / "b.gpck", bytes);
  CHECK_THROWS_AS(read_checkpoint(dir / "b.gpck"), DataError);
  bytes.resize(bytes.size() / 3);
  io::write_file(dir / "c.gpck", bytes);
  CHECK_THROWS_AS(read_checkpoint(dir / "c.gpck"), DataError);
  CHECK_THROWS_AS(read_checkpoint(dir / "none.gpck"), ConfigError);

  const TargetModel toy = make_architecture("toy3", 0, 5);
  save_target_model(dir / "toy.gpck", toy);
  const TargetModel loaded = load_target_model(dir / "toy.gpck");
  CHECK(loaded.checksum() == toy.checksum());
  CHECK(loaded.layer_specs() == toy.layer_specs());
}

TEST_CASE("CIFAR-10 records and truncation diagnostics") {
  std::vector<unsigned char> bytes(3 * io::kCifarRecordBytes, 0);
  bytes[0] = 7;
  bytes[1] = 255;                                  // red, pixel (0, 0)
  bytes[io::kCifarRecordBytes] = 2;
  bytes[2 * io::kCifarRecordBytes + 1 + 2048] = 51;  // blue, pixel (0, 0) of record 2
  const io::Dataset d = io::parse_cifar10(bytes, "batch.bin");
  CHECK(d.size() == 3);
  CHECK(d.labels == std::vector<int>{7, 2, 0});
  CHECK(d.images.shape() == Shape{3, 3, 32, 32});
  CHECK(d.images.at(0, 0, 0, 0) == doctest::Approx((1.0 - d.mean[0]) / d.stddev[0]));
  CHECK(d.images.at(2, 2, 0, 0) == doctest::Approx((0.2 - d.mean[2]) / d.stddev[2]));
  CHECK(d.denormalize(d.images.slice(0))[0] == doctest::Approx(1.0));

  bytes.resize(2 * io::kCifarRecordBytes + 100);
  try {
    io::parse_cifar10(bytes, "batch.bin");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("record 2 starts at byte 6146") != std::string::npos);
    CHECK(msg.find("truncated after 100 bytes") != std::string::npos);
  }
  bytes.resize(io::kCifarRecordBytes);
  bytes[0] = 10;
  CHECK_THROWS_AS(io::parse_cifar10(bytes, "x"), DataError);

  const auto dir = fixtures::scratch_dir("cifar");
  std::vector<unsigned char> ok(2 * io::kCifarRecordBytes, 1);
  io::write_file(dir / "test_batch.bin", ok);
  const io::Dataset loaded = io::load_dataset({"cifar10", dir, "test"});
  CHECK(loaded.size() == 2);
  CHECK_THROWS_AS(io::load_dataset({"cifar10", dir, "train"}), ConfigError);
}

TEST_CASE("two-blob stream is deterministic and well-formed") {
  const auto a = io::two_blob_bytes(40, 3), b = io::two_blob_bytes(40, 3), c = io::two_blob_bytes(40, 4);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 40 * 769);
  const io::Dataset train = io::load_dataset({"two-blob", {}, "train", 0, 7});
  const io::Dataset test = io::load_dataset({"two-blob", {}, "test", 0, 7});
  CHECK(train.size() == io::kTwoBlobDefaultTrain);
  CHECK(test.size() == io::kTwoBlobDefaultTest);
  CHECK(train.images.shape() == Shape{512, 3, 16, 16});
  CHECK_FALSE(train.images.slice(0) == test.images.slice(0));
  // the blob's half carries more energy than the other half
  std::size_t right = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Tensor x = test.denormalize(test.images.slice(i));
    double left_sum = 0, right_sum = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t xx = 0; xx < 16; ++xx) (xx < 8 ? left_sum : right_sum) += x[(k * 16 + y) * 16 + xx];
    right += (right_sum > left_sum) == (test.labels[i] == 1);
  }
  CHECK(right == test.size());
  CHECK_THROWS_AS(io::load_dataset({"two-blob", {}, "validation"}), ConfigError);
  CHECK_THROWS_AS(io::load_dataset({"mnist", {}, "test"}), ConfigError);
}

TEST_CASE("PNM files and image directories") {
  const auto dir = fixtures::scratch_dir("pnm");
  io::Image rgb{3, 2, 3, {}};
  for (std::size_t i = 0; i < 18; ++i) rgb.pixels.push_back(static_cast<std::uint8_t>(i * 13));
  io::write_pnm(dir / "a.ppm", rgb);
  const io::Image back = io::read_pnm(dir / "a.ppm");
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.pixels == rgb.pixels);
  io::Image gray{2, 2, 1, {0, 64, 128, 255}};
  io::write_pnm(dir / "b.pgm", gray);
  CHECK(io::read_pnm(dir / "b.pgm").pixels == gray.pixels);
  {
    std::ofstream bad(dir / "bad.ppm", std::ios::binary);
    bad << "P6\n3 2\n255\nxx";
  }
  CHECK_THROWS_AS(io::read_pnm(dir / "bad.ppm"), DataError);

  {
    std::ofstream labels(dir / "labels.txt");
    labels << "# file label\na.ppm 1\nb.pgm 0\n";
  }
  const io::Dataset d = io::load_dataset({"imagedir", dir, "test", 0, 0, 4});
  CHECK(d.size() == 2);
  CHECK(d.labels == std::vector<int>{1, 0});
  CHECK(d.num_classes == 2);
  CHECK(d.images.shape() == Shape{2, 3, 4, 4});
  // grayscale is replicated across channels
  CHECK(d.images.at(1, 0, 2, 2) == d.images.at(1, 2, 2, 2));
}

TEST_CASE("image arithmetic") {
  const Tensor t = fixtures::random_tensor({3, 5, 4}, 1, 0, 1);
  const Tensor same = io::resize_bilinear(t, 5, 4);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(same[i] == doctest::Approx(t[i]).epsilon(1e-12));
  const Tensor flat = io::resize_bilinear(Tensor({1, 3, 3}, 0.25), 7, 9);
  for (double v : flat.values()) CHECK(v == doctest::Approx(0.25));
  // upsampling by two with half-pixel centers: output 1 sits a quarter pixel
  // right of input 0, so it mixes 3/4 of input 0 and 1/4 of input 1
  const Tensor ramp = io::resize_bilinear(Tensor({1, 1, 2}, std::vector<double>{0.0, 1.0}), 1, 4);
  CHECK(ramp.storage() == std::vector<double>{0.0, 0.25, 0.75, 1.0});

  CHECK(io::jet(0.0)[2] > 0.4);
  CHECK(io::jet(1.0)[0] > 0.4);
  CHECK(io::jet(0.5)[1] == doctest::Approx(1.0));

  const Tensor rgb = fixtures::random_tensor({3, 2, 2}, 2, 0, 1);
  const Tensor heat({2, 2}, 0.5);
  const Tensor out = io::overlay_heatmap(rgb, heat);
  const auto color = io::jet(0.5);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < 4; ++j) CHECK(out[c * 4 + j] == doctest::Approx(0.5 * rgb[c * 4 + j] + 0.5 * color[c]));

  const io::Image img = io::to_image(Tensor({1, 1, 2}, std::vector<double>{0.0, 1.0}));
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 255});
  CHECK(io::to_tensor(img).storage() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("key-value configuration") {
  const auto kv = io::parse_key_values("# header\n a = 1 \n\nb=two # trailing\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"a", "1"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"b", "two"});
  CHECK_THROWS_AS(io::parse_key_values("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_key_values("no equals sign\n"), ConfigError);
  CHECK(io::to_size("k", "12") == 12);
  CHECK_THROWS_AS(io::to_size("k", "-1"), ConfigError);
  CHECK_THROWS_AS(io::to_size("k", "3x"), ConfigError);
  CHECK(io::to_double("k", "1e-3") == 1e-3);
  CHECK_THROWS_AS(io::to_double("k", "fast"), ConfigError);
  CHECK(io::to_bool("k", "true"));
  CHECK_FALSE(io::to_bool("k", "false"));
  CHECK_THROWS_AS(io::to_bool("k", "maybe"), ConfigError);
}
