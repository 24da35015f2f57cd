// SPDX-License-Identifier: Apache-2.0
#pragma once

// Distance-aware quantization of decoded importance scores into pathway mask
// values. With the default single bit the two levels are {0, 1}.
//
//   normalized = (2^bits - 1) * (clamp(d, lower, upper) - lower) / (upper - lower)
//   mask       = assign(normalized) / (2^bits - 1)
//
// `assign` is the hard nearest-level choice at evaluation time and, during
// training, the expectation of the level under softmax(-|normalized - k| / T).

namespace genpath {

struct QuantizerConfig {
  double lower = 0.0;
  double upper = 1.0;
  int bits = 1;
  double temperature = 0.2;

  int levels() const { return 1 << bits; }
  // Throws ConfigError when lower >= upper, bits < 1 or temperature <= 0.
  void validate() const;
};

struct SoftQuantized {
  double value;
  double derivative;  // d value / d input
};

double quantizer_normalize(double d, const QuantizerConfig& config);

// Relaxed assignment. The derivative is zero outside [lower, upper].
SoftQuantized soft_quantize_value(double d, const QuantizerConfig& config);

// Nearest-level assignment, ties resolved toward the higher level. Returns
// an exact multiple of 1 / (2^bits - 1); with one bit exactly 0.0 or 1.0.
double hard_quantize_value(double d, const QuantizerConfig& config);

}  // namespace genpath
