// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "genpath/errors.hpp"
#include "genpath/training.hpp"
#include "support/fixtures.hpp"

using namespace genpath;
using fixtures::random_tensor;

namespace {

std::vector<double> logits_of(const std::vector<double>& probs) {
  std::vector<double> out;
  for (double p : probs) out.push_back(std::log(p));
  return out;
}

double entropy(const std::vector<double>& p) {
  double h = 0;
  for (double v : p) h -= v * std::log(v);
  return h;
}

}  // namespace

TEST_CASE("distillation loss oracles") {
  const double expect = -(0.7 * std::log(0.6) + 0.3 * std::log(0.4));
  CHECK(kd_loss(logits_of({0.6, 0.4}), logits_of({0.7, 0.3})) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(kd_loss(logits_of({0.7, 0.3}), logits_of({0.7, 0.3})) == doctest::Approx(entropy({0.7, 0.3})).epsilon(1e-12));
  // a near one-hot prediction off the target support is bounded by the clamp
  const double far = kd_loss(std::vector<double>{0.0, 2000.0}, std::vector<double>{50.0, 0.0});
  CHECK(far <= -std::log(1e-12) + 1e-9);
  CHECK(far > 20.0);
  CHECK_THROWS_AS(kd_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("Gibbs inequality on random distribution pairs") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const auto p = softmax(a);
    CHECK(kd_loss(b, a) >= entropy(p) - 1e-9);
    CHECK(std::abs(kd_loss(a, a) - entropy(p)) < 1e-9);
  }
}

TEST_CASE("sparsity and total loss arithmetic") {
  const std::vector<LayerSpec> specs{{1, 1, 3}};
  CHECK(sparsity_loss(PathwayMask::zeros(specs)) == 0.0);
  CHECK(sparsity_loss(PathwayMask::ones(std::vector<LayerSpec>{{2, 3, 3}})) == 18.0);
  CHECK(sparsity_loss(PathwayMask({Tensor({1, 1, 3}, std::vector<double>{0.5, 1, 0})})) == 1.25);
  TrainConfig c;
  c.beta = 0.005;
  CHECK(total_loss(2, 10, c) == doctest::Approx(2.05).epsilon(1e-15));
  c.beta = 0;
  CHECK(total_loss(2.5, 10, c) == 2.5);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.alpha = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.beta = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("sparsity gradient points toward the zero mask") {
  const Tensor p = random_tensor({3, 4}, 4, 0.0, 1.0);
  ad::Var v = ad::parameter(p);
  ad::backward(ad::sum_squares(v));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(v.grad()[i] == doctest::Approx(2 * p[i]));
}

TEST_CASE("objective gradient matches finite differences on generator parameters") {
  const TargetModel m = fixtures::tiny3(5);
  Generator g(GeneratorConfig{.seed = 6}, m.layer_specs());
  Tensor batch({4, 2, 6, 6});
  for (std::size_t i = 0; i < 4; ++i) batch.set_slice(i, random_tensor({2, 6, 6}, 40 + i));

  const auto params = g.parameters();
  auto objective = [&]() { return batch_objective(m, g, batch, 1.0, 0.01, false).total.value()[0]; };
  BatchObjective o = batch_objective(m, g, batch, 1.0, 0.01, false);
  ad::backward(o.total);

  std::mt19937_64 rng(7);
  int checked = 0;
  for (const auto& [name, var] : params) {
    CAPTURE(name);
    ad::Var p = var;
    std::uniform_int_distribution<std::size_t> pick(0, p.value().size() - 1);
    for (int k = 0; k < 2; ++k) {
      const std::size_t j = pick(rng);
      const double x0 = p.value()[j], h = 1e-5;
      p.mutable_value()[j] = x0 + h;
      const double up = objective();
      p.mutable_value()[j] = x0 - h;
      const double down = objective();
      p.mutable_value()[j] = x0;
      const double fd = (up - down) / (2 * h);
      const double an = p.has_grad() ? p.grad()[j] : 0.0;
      CHECK(std::abs(an - fd) <= 1e-3 * std::max(std::abs(fd), 1e-3));
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("zero epochs leave the generator untouched") {
  const TargetModel m = fixtures::tiny3(8);
  Generator g(GeneratorConfig{.seed = 9}, m.layer_specs());
  const auto before = g.state();
  TrainConfig c;
  c.epochs = 0;
  const TrainState s = train(m, g, random_tensor({6, 2, 6, 6}, 10), c);
  CHECK(s.step == 0);
  const auto after = g.state();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].second == after[i].second);
}

TEST_CASE("training is reproducible, leaves the target intact and writes artifacts") {
  const TargetModel m = fixtures::tiny3(11);
  const auto checksum = m.checksum();
  const Tensor data = random_tensor({10, 2, 6, 6}, 12);
  const auto dir = fixtures::scratch_dir("train");
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 13;
  c.out_dir = dir;
  std::vector<LossRecord> epochs;
  Generator g1(GeneratorConfig{.seed = 1}, m.layer_specs());
  const TrainState s1 = train(m, g1, data, c, [&](const LossRecord& r) { epochs.push_back(r); });
  c.out_dir.clear();
  Generator g2(GeneratorConfig{.seed = 1}, m.layer_specs());
  const TrainState s2 = train(m, g2, data, c);

  CHECK(m.checksum() == checksum);
  CHECK(s1.step == 6);
  CHECK(s1.history.size() == 6);
  CHECK(epochs.size() == 2);
  REQUIRE(s2.history.size() == s1.history.size());
  for (std::size_t i = 0; i < s1.history.size(); ++i) {
    CHECK(s1.history[i].total == s2.history[i].total);
    CHECK(std::isfinite(s1.history[i].total));
  }
  CHECK(s1.checkpoints.size() == 3);  // two epochs plus the final generator
  CHECK(std::filesystem::exists(dir / "generator_epoch2.gpck"));
  CHECK(std::filesystem::exists(dir / "generator.gpck"));
  std::ifstream csv(dir / "loss.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,step,kd,sparsity,total");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 6);
}

TEST_CASE("non-finite loss aborts naming the batch") {
  const TargetModel m = fixtures::tiny3(14);
  Generator g(GeneratorConfig{.seed = 2}, m.layer_specs());
  g.scorer().back().bias.mutable_value()[0] = std::nan("");
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 4;
  try {
    train(m, g, random_tensor({8, 2, 6, 6}, 15, 0.0, 1.0), c);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
}
