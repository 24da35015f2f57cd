// SPDX-License-Identifier: Apache-2.0
#include "genpath/simd/kernels.hpp"

namespace genpath::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void relu_scalar(const double* x, double* out, std::size_t n) {
  // NaN passes through so that non-finite values surface downstream
  for (std::size_t i = 0; i < n; ++i) out[i] = !(x[i] <= 0.0) ? x[i] : 0.0;
}

void relu_backward_scalar(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::Scalar, dot_scalar,         axpy_scalar,
                                 mul_scalar,      mul_acc_scalar,     sum_squares_scalar,
                                 relu_scalar,     relu_backward_scalar};
  return table;
}

}  // namespace genpath::simd
