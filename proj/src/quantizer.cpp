// SPDX-License-Identifier: Apache-2.0
#include "genpath/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "genpath/errors.hpp"

namespace genpath {

void QuantizerConfig::validate() const {
  if (!(lower < upper)) {
    throw ConfigError("quantizer bounds require lower < upper, got lower=" + std::to_string(lower) +
                      " upper=" + std::to_string(upper));
  }
  if (bits < 1 || bits > 16) throw ConfigError("quantizer bits must be in [1, 16], got " + std::to_string(bits));
  if (!(temperature > 0.0)) throw ConfigError("quantizer temperature must be positive");
}

double quantizer_normalize(double d, const QuantizerConfig& config) {
  const double top = static_cast<double>(config.levels() - 1);
  return top * (std::min(std::max(d, config.lower), config.upper) - config.lower) / (config.upper - config.lower);
}

SoftQuantized soft_quantize_value(double d, const QuantizerConfig& config) {
  if (!std::isfinite(d)) throw NumericalError("quantizer input is not finite");
  const int levels = config.levels();
  const double top = static_cast<double>(levels - 1);
  const double x = quantizer_normalize(d, config);

  // softmax over -|x - k| / T, stabilised by the largest logit
  std::vector<double> w(static_cast<std::size_t>(levels));
  std::vector<double> slope(static_cast<std::size_t>(levels));
  double best = -INFINITY;
  for (int k = 0; k < levels; ++k) best = std::max(best, -std::abs(x - k) / config.temperature);
  double z = 0.0;
  for (int k = 0; k < levels; ++k) {
    const double logit = -std::abs(x - k) / config.temperature;
    w[static_cast<std::size_t>(k)] = std::exp(logit - best);
    z += w[static_cast<std::size_t>(k)];
    const double diff = x - k;
    slope[static_cast<std::size_t>(k)] = diff > 0 ? -1.0 / config.temperature : diff < 0 ? 1.0 / config.temperature : 0.0;
  }
  double expected = 0.0, mean_slope = 0.0;
  for (int k = 0; k < levels; ++k) {
    w[static_cast<std::size_t>(k)] /= z;
    expected += k * w[static_cast<std::size_t>(k)];
    mean_slope += w[static_cast<std::size_t>(k)] * slope[static_cast<std::size_t>(k)];
  }
  double d_expected = 0.0;
  for (int k = 0; k < levels; ++k) {
    d_expected += k * w[static_cast<std::size_t>(k)] * (slope[static_cast<std::size_t>(k)] - mean_slope);
  }
  const bool inside = d >= config.lower && d <= config.upper;
  const double dx_dd = inside ? top / (config.upper - config.lower) : 0.0;
  return SoftQuantized{expected / top, d_expected / top * dx_dd};
}

double hard_quantize_value(double d, const QuantizerConfig& config) {
  if (!std::isfinite(d)) throw NumericalError("quantizer input is not finite");
  const double top = static_cast<double>(config.levels() - 1);
  const double x = quantizer_normalize(d, config);
  // nearest level; x in [0, top] so floor(x + 0.5) rounds halves upward
  const double level = std::min(std::floor(x + 0.5), top);
  return level / top;
}

}  // namespace genpath
