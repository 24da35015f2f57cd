// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace genpath::simd {

enum class Backend { Scalar, Avx2 };

// Inner-loop kernels used by the tensor ops. Every backend computes the same
// mathematical result; backends may differ in summation order (and FMA
// contraction), so reductions agree to rounding, elementwise ops agree exactly.
struct KernelTable {
  Backend backend;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = x[i] * y[i]
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // out[i] += x[i] * y[i]
  void (*mul_acc)(const double* x, const double* y, double* out, std::size_t n);
  // sum_i x[i]^2
  double (*sum_squares)(const double* x, std::size_t n);
  // out[i] = x[i] if x[i] > 0 or NaN, else +0
  void (*relu)(const double* x, double* out, std::size_t n);
  // out[i] = x[i] > 0 ? g[i] : 0
  void (*relu_backward)(const double* x, const double* g, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
const KernelTable& avx2_kernels();

// True when the backend was compiled in and the running CPU supports it.
bool available(Backend backend);

// The table selected at startup: AVX2 when available, unless the environment
// variable GENPATH_SIMD=scalar forces the reference kernels.
const KernelTable& kernels();

// Overrides the active backend (tests and benchmarks). Throws if unavailable.
void set_backend(Backend backend);

std::string_view name(Backend backend);

}  // namespace genpath::simd
