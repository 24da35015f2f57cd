// SPDX-License-Identifier: Apache-2.0
#include "genpath/visualization.hpp"

#include <algorithm>
#include <cmath>

#include "genpath/errors.hpp"

namespace genpath {

Tensor pathway_saliency(const TargetModel& model, const Tensor& input, const PathwayMask& mask,
                        std::size_t class_index) {
  const MaskedGradients g = masked_gradients(model, input, mask, class_index);
  const std::size_t c = g.input_grad.dim(0), h = g.input_grad.dim(1), w = g.input_grad.dim(2);
  Tensor out({h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < h * w; ++j) out[j] = std::max(out[j], std::abs(g.input_grad[k * h * w + j]));
  }
  const double peak = *std::max_element(out.values().begin(), out.values().end());
  if (peak > 0) {
    for (double& v : out.values()) v /= peak;
  }
  return out;
}

std::vector<std::array<double, 2>> project_2d(const std::vector<std::vector<double>>& embeddings) {
  const std::size_t n = embeddings.size();
  std::vector<std::array<double, 2>> out(n, {0.0, 0.0});
  if (n == 0) return out;
  const std::size_t d = embeddings[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw ShapeError("project_2d: embeddings differ in dimension");
    for (std::size_t j = 0; j < d; ++j) mean[j] += e[j] / static_cast<double>(n);
  }
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i][j] = embeddings[i][j] - mean[j];
  }

  std::vector<std::vector<double>> axes;
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 0.01 * static_cast<double>(j % 7) + axis * ((j % 2) ? 1.0 : -1.0);
    for (int it = 0; it < 200; ++it) {
      for (const auto& a : axes) {
        double dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += v[j] * a[j];
        for (std::size_t j = 0; j < d; ++j) v[j] -= dot * a[j];
      }
      // v <- X^T X v
      std::vector<double> next(d, 0.0);
      for (const auto& row : x) {
        double proj = 0;
        for (std::size_t j = 0; j < d; ++j) proj += row[j] * v[j];
        for (std::size_t j = 0; j < d; ++j) next[j] += proj * row[j];
      }
      double norm = 0;
      for (double t : next) norm += t * t;
      norm = std::sqrt(norm);
      if (norm == 0) break;
      for (std::size_t j = 0; j < d; ++j) v[j] = next[j] / norm;
    }
    axes.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 2; ++a) {
      double p = 0;
      for (std::size_t j = 0; j < d; ++j) p += x[i][j] * axes[a][j];
      out[i][a] = std::isfinite(p) ? p : 0.0;
    }
  }
  return out;
}

}  // namespace genpath
