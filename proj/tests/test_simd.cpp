// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "genpath/simd/kernels.hpp"

using namespace genpath::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Odd lengths exercise the vector tails.
const std::size_t kLengths[] = {0, 1, 3, 4, 7, 8, 15, 16, 33, 100, 1023};

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(available(Backend::Scalar));
  CHECK(scalar_kernels().backend == Backend::Scalar);
  CHECK(name(Backend::Avx2) == "avx2");
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  if (!available(Backend::Avx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence skipped");
    return;
  }
  const KernelTable& s = scalar_kernels();
  const KernelTable& v = avx2_kernels();
  for (std::size_t n : kLengths) {
    CAPTURE(n);
    const auto x = random_vec(n, 1 + n), y = random_vec(n, 100 + n);
    // reductions differ only in summation order
    const double tol = 1e-12 * (1.0 + static_cast<double>(n));
    CHECK(std::abs(s.dot(x.data(), y.data(), n) - v.dot(x.data(), y.data(), n)) <= tol);
    CHECK(std::abs(s.sum_squares(x.data(), n) - v.sum_squares(x.data(), n)) <= tol);

    std::vector<double> a = y, b = y;
    s.axpy(0.37, x.data(), a.data(), n);
    v.axpy(0.37, x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));

    std::vector<double> m1(n), m2(n);
    s.mul(x.data(), y.data(), m1.data(), n);
    v.mul(x.data(), y.data(), m2.data(), n);
    CHECK(m1 == m2);

    a = y;
    b = y;
    s.mul_acc(x.data(), y.data(), a.data(), n);
    v.mul_acc(x.data(), y.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));

    s.relu(x.data(), m1.data(), n);
    v.relu(x.data(), m2.data(), n);
    CHECK(m1 == m2);
    s.relu_backward(x.data(), y.data(), m1.data(), n);
    v.relu_backward(x.data(), y.data(), m2.data(), n);
    CHECK(m1 == m2);
  }
}

TEST_CASE("relu passes NaN through and maps signed zero to zero") {
  const std::vector<double> x{std::nan(""), -0.0, 0.0, -1.0, 2.0, std::nan(""), -3.0, 4.0, std::nan("")};
  std::vector<const KernelTable*> tables{&scalar_kernels()};
  if (available(Backend::Avx2)) tables.push_back(&avx2_kernels());
  for (const KernelTable* t : tables) {
    std::vector<double> out(x.size());
    t->relu(x.data(), out.data(), x.size());
    CHECK(std::isnan(out[0]));
    CHECK(std::isnan(out[5]));
    CHECK(std::isnan(out[8]));
    CHECK_FALSE(std::signbit(out[1]));
    CHECK(out[1] == 0.0);
    CHECK(out[3] == 0.0);
    CHECK(out[4] == 2.0);
    CHECK(out[7] == 4.0);
  }
}

TEST_CASE("backend can be switched at runtime") {
  const Backend before = kernels().backend;
  set_backend(Backend::Scalar);
  CHECK(kernels().backend == Backend::Scalar);
  if (available(Backend::Avx2)) {
    set_backend(Backend::Avx2);
    CHECK(kernels().backend == Backend::Avx2);
  } else {
    CHECK_THROWS(set_backend(Backend::Avx2));
  }
  set_backend(before);
}
