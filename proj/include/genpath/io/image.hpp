// SPDX-License-Identifier: Apache-2.0
#pragma once

// 8-bit raster images in binary PPM (P6) / PGM (P5) form, plus the small
// amount of image arithmetic the visualizations need.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "genpath/tensor.hpp"

namespace genpath::io {

struct Image {
  std::size_t width = 0, height = 0, channels = 0;  // channels is 1 or 3
  std::vector<std::uint8_t> pixels;                 // interleaved, row-major

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

// Reads P5/P6 with maxval <= 255. Throws DataError on malformed input.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

// Bilinear resampling of a (c, h, w) tensor, align-corners=false convention.
Tensor resize_bilinear(const Tensor& chw, std::size_t height, std::size_t width);

// Jet colormap of a value clamped to [0, 1], as RGB in [0, 1].
std::array<double, 3> jet(double value);

// (c, h, w) tensor with values in [0, 1] (1 or 3 channels) to an image.
Image to_image(const Tensor& chw);
// Image to a (c, h, w) tensor in [0, 1].
Tensor to_tensor(const Image& image);

// out = 0.5 * rgb + 0.5 * jet(heat); rgb is (3, h, w) in [0, 1], heat is
// (h, w) in [0, 1]. Returns (3, h, w).
Tensor overlay_heatmap(const Tensor& rgb, const Tensor& heat);

// Filled-marker scatter plot with one color per class; returns an RGB image.
Image scatter_plot(const std::vector<std::array<double, 2>>& points, const std::vector<int>& labels,
                   std::size_t size = 256);

// Line chart of several series over a shared x grid.
Image line_plot(const std::vector<double>& x, const std::vector<std::vector<double>>& series, std::size_t width = 320,
                std::size_t height = 240);

}  // namespace genpath::io
