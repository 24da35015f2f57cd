// SPDX-License-Identifier: Apache-2.0
#include "genpath/io/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "genpath/errors.hpp"
#include "genpath/io/binary.hpp"

namespace genpath::io {

namespace {

// Next whitespace-delimited header token, skipping `#` comments.
std::string header_token(const std::vector<unsigned char>& bytes, std::size_t& pos, const std::string& source) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
  if (tok.empty()) throw DataError(source + ": truncated PNM header");
  return tok;
}

std::size_t header_number(const std::vector<unsigned char>& bytes, std::size_t& pos, const std::string& source) {
  const std::string tok = header_token(bytes, pos, source);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw DataError(source + ": bad PNM header field '" + tok + "'");
  }
  return std::stoul(tok);
}

const std::array<std::array<double, 3>, 8> kPalette = {{{0.12, 0.47, 0.71},
                                                       {1.00, 0.50, 0.05},
                                                       {0.17, 0.63, 0.17},
                                                       {0.84, 0.15, 0.16},
                                                       {0.58, 0.40, 0.74},
                                                       {0.55, 0.34, 0.29},
                                                       {0.89, 0.47, 0.76},
                                                       {0.50, 0.50, 0.50}}};

void put(Image& img, long y, long x, const std::array<double, 3>& rgb) {
  if (y < 0 || x < 0 || y >= static_cast<long>(img.height) || x >= static_cast<long>(img.width)) return;
  for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(rgb[c] * 255));
}

Image blank(std::size_t w, std::size_t h) {
  Image img{w, h, 3, std::vector<std::uint8_t>(w * h * 3, 255)};
  return img;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string source = path.string();
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos, source);
  if (magic != "P5" && magic != "P6") throw DataError(source + ": not a binary PGM/PPM file");
  Image img;
  img.channels = magic == "P6" ? 3 : 1;
  img.width = header_number(bytes, pos, source);
  img.height = header_number(bytes, pos, source);
  const std::size_t maxval = header_number(bytes, pos, source);
  if (maxval == 0 || maxval > 255) throw DataError(source + ": only 8-bit PNM is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = img.width * img.height * img.channels;
  if (img.width == 0 || img.height == 0 || pos + need > bytes.size()) {
    throw DataError(source + ": raster holds " + std::to_string(bytes.size() > pos ? bytes.size() - pos : 0) +
                    " bytes, expected " + std::to_string(need));
  }
  img.pixels.resize(need);
  for (std::size_t i = 0; i < need; ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(bytes[pos + i] * 255 / maxval);
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ConfigError("PNM output needs 1 or 3 channels");
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  write_file(path, bytes);
}

Tensor resize_bilinear(const Tensor& chw, std::size_t height, std::size_t width) {
  if (chw.rank() != 3) throw ShapeError("resize_bilinear expects (c, h, w), got " + to_string(chw.shape()));
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out({c, height, width});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        const double* p = chw.data() + k * h * w;
        const double top = p[y0 * w + x0] * (1 - wx) + p[y0 * w + x1] * wx;
        const double bottom = p[y1 * w + x0] * (1 - wx) + p[y1 * w + x1] * wx;
        out[(k * height + y) * width + x] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

std::array<double, 3> jet(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto ramp = [](double t) { return std::clamp(1.5 - std::abs(4.0 * t), 0.0, 1.0); };
  return {ramp(v - 0.75), ramp(v - 0.5), ramp(v - 0.25)};
}

Image to_image(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3)) {
    throw ShapeError("to_image expects (1|3, h, w), got " + to_string(chw.shape()));
  }
  Image img{chw.dim(2), chw.dim(1), chw.dim(0), {}};
  img.pixels.resize(img.width * img.height * img.channels);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = std::clamp(chw[(c * img.height + y) * img.width + x], 0.0, 1.0);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255));
      }
    }
  }
  return img;
}

Tensor to_tensor(const Image& image) {
  Tensor t({image.channels, image.height, image.width});
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        t[(c * image.height + y) * image.width + x] = image.at(y, x, c) / 255.0;
      }
    }
  }
  return t;
}

Tensor overlay_heatmap(const Tensor& rgb, const Tensor& heat) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("overlay expects a (3, h, w) image");
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  if (heat.size() != h * w) throw ShapeError("heatmap size does not match the image");
  Tensor out({3, h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    const auto color = jet(heat[i]);
    for (std::size_t c = 0; c < 3; ++c) out[c * h * w + i] = 0.5 * rgb[c * h * w + i] + 0.5 * color[c];
  }
  return out;
}

Image scatter_plot(const std::vector<std::array<double, 2>>& points, const std::vector<int>& labels, std::size_t size) {
  Image img = blank(size, size);
  if (points.empty()) return img;
  double lo[2] = {points[0][0], points[0][1]}, hi[2] = {lo[0], lo[1]};
  for (const auto& p : points) {
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double margin = 8, span = static_cast<double>(size) - 2 * margin;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = hi[0] > lo[0] ? (points[i][0] - lo[0]) / (hi[0] - lo[0]) : 0.5;
    const double v = hi[1] > lo[1] ? (points[i][1] - lo[1]) / (hi[1] - lo[1]) : 0.5;
    const long cx = std::lround(margin + u * span), cy = std::lround(margin + (1 - v) * span);
    const auto& color = kPalette[static_cast<std::size_t>(i < labels.size() ? labels[i] : 0) % kPalette.size()];
    for (long dy = -2; dy <= 2; ++dy) {
      for (long dx = -2; dx <= 2; ++dx) put(img, cy + dy, cx + dx, color);
    }
  }
  return img;
}

Image line_plot(const std::vector<double>& x, const std::vector<std::vector<double>>& series, std::size_t width,
                std::size_t height) {
  Image img = blank(width, height);
  if (x.size() < 2) return img;
  double ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (!(yhi > ylo)) {
    ylo -= 1;
    yhi += 1;
  }
  const double margin = 10;
  const double xs = (static_cast<double>(width) - 2 * margin) / (x.back() - x.front());
  const double ys = (static_cast<double>(height) - 2 * margin) / (yhi - ylo);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& color = kPalette[k % kPalette.size()];
    for (std::size_t i = 0; i + 1 < std::min(x.size(), series[k].size()); ++i) {
      const double x0 = margin + (x[i] - x.front()) * xs, x1 = margin + (x[i + 1] - x.front()) * xs;
      const double y0 = height - margin - (series[k][i] - ylo) * ys;
      const double y1 = height - margin - (series[k][i + 1] - ylo) * ys;
      const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        put(img, std::lround(y0 + t * (y1 - y0)), std::lround(x0 + t * (x1 - x0)), color);
      }
    }
  }
  return img;
}

}  // namespace genpath::io
