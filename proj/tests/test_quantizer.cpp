// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "genpath/errors.hpp"
#include "genpath/generator.hpp"
#include "genpath/quantizer.hpp"

using namespace genpath;

TEST_CASE("hard assignment picks the nearest level") {
  QuantizerConfig q;
  CHECK(hard_quantize_value(0.9, q) == 1.0);
  CHECK(hard_quantize_value(0.1, q) == 0.0);
  CHECK(hard_quantize_value(1.7, q) == 1.0);
  CHECK(hard_quantize_value(-3.0, q) == 0.0);
  CHECK(hard_quantize_value(0.5, q) == 1.0);  // ties go up
}

TEST_CASE("multi-bit levels are multiples of 1/(2^b - 1)") {
  QuantizerConfig q;
  q.bits = 2;
  CHECK(hard_quantize_value(0.34, q) == doctest::Approx(1.0 / 3.0));
  CHECK(hard_quantize_value(0.8, q) == doctest::Approx(2.0 / 3.0));
  CHECK(hard_quantize_value(0.9, q) == 1.0);
  CHECK(quantizer_normalize(0.5, q) == doctest::Approx(1.5));
}

TEST_CASE("configuration checks") {
  QuantizerConfig q;
  q.lower = 1.0;
  q.upper = 1.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = {};
  q.bits = 0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = {};
  q.temperature = 0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("soft assignment derivative matches finite differences") {
  for (int bits : {1, 2}) {
    QuantizerConfig q;
    q.bits = bits;
    const double step = 1.0 / (q.levels() - 1);
    for (double d = 0.013; d < 1.0; d += 0.037) {
      // skip points equidistant between two levels
      const double r = std::fmod(d, step) / step;
      if (std::abs(r - 0.5) < 0.02) continue;
      const double h = 1e-6;
      const double fd = (soft_quantize_value(d + h, q).value - soft_quantize_value(d - h, q).value) / (2 * h);
      CHECK(std::abs(soft_quantize_value(d, q).derivative - fd) < 1e-3);
    }
    CHECK(soft_quantize_value(-0.5, q).derivative == 0.0);
    CHECK(soft_quantize_value(1.5, q).derivative == 0.0);
  }
}

TEST_CASE("eval-mode output is exactly binary and monotone") {
  QuantizerConfig q;
  double prev = -1;
  for (int i = -50; i <= 150; ++i) {
    const double p = hard_quantize_value(i / 100.0, q);
    CHECK((p == 0.0 || p == 1.0));
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("soft output approaches hard output as temperature shrinks") {
  double last = 1e9;
  for (double t : {1.0, 0.1, 0.01}) {
    QuantizerConfig q;
    q.temperature = t;
    double worst = 0;
    for (int i = 0; i <= 100; ++i) {
      const double d = -0.2 + 1.4 * i / 100.0;
      if (std::abs(d - 0.5) < 0.05) continue;
      worst = std::max(worst, std::abs(soft_quantize_value(d, q).value - hard_quantize_value(d, q)));
    }
    CHECK(worst < last);
    last = worst;
  }
  CHECK(last < 1e-4);
}

TEST_CASE("daq_binarize in both modes") {
  const std::vector<Tensor> d{Tensor({1, 2, 2}, std::vector<double>{0.9, 0.1, 1.7, 0.49})};
  QuantizerConfig q;
  const PathwayMask hard = daq_binarize(d, q, Mode::kEval);
  CHECK(hard.is_binary());
  CHECK(hard.layer(0).storage() == std::vector<double>{1, 0, 1, 0});
  const PathwayMask soft = daq_binarize(d, q, Mode::kTrain);
  CHECK(soft.layer(0)[0] > 0.5);
  CHECK(soft.layer(0)[0] < 1.0);
  const std::vector<Tensor> bad{Tensor({1, 1, 1}, std::vector<double>{std::nan("")})};
  CHECK_THROWS(daq_binarize(bad, q, Mode::kEval));
}
