// SPDX-License-Identifier: Apache-2.0
#include "support/fixtures.hpp"

#include <unistd.h>

#include <chrono>

#include "genpath/architectures.hpp"
#include "genpath/fixture.hpp"
#include "genpath/training.hpp"

namespace fixtures {

using namespace genpath;

TargetModel one_conv_model(double weight, double bias, std::size_t h, std::size_t w) {
  TargetModel m("one_conv", {1, h, w}, 1);
  m.add_conv(Tensor({1, 1, 1, 1}, weight), Tensor({1}, bias), {1, 0});
  m.add_dense(Tensor::ones({1, h * w}), Tensor::zeros({1}), false);
  m.finalize();
  return m;
}

namespace {

TargetModel tiny_stack(std::uint64_t seed, bool positive) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(positive ? 0.05 : -0.6, 0.6);
  auto rnd = [&](Shape s) {
    Tensor t(std::move(s));
    for (double& v : t.values()) v = u(rng);
    return t;
  };
  TargetModel m(positive ? "linear_tiny" : "tiny3", {2, 6, 6}, 2);
  m.add_conv(rnd({3, 2, 3, 3}), rnd({3}), {1, 1}, 2, 2);  // (3, 6, 6), pooled to 3x3
  m.add_conv(rnd({4, 3, 2, 2}), rnd({4}), {1, 0});        // (4, 2, 2)
  m.add_conv(rnd({3, 4, 1, 1}), rnd({3}), {1, 0});        // (3, 2, 2)
  m.add_dense(rnd({2, 12}), rnd({2}), false);
  m.finalize();
  return m;
}

}  // namespace

TargetModel tiny3(std::uint64_t seed) { return tiny_stack(seed, false); }
TargetModel linear_tiny(std::uint64_t seed) { return tiny_stack(seed, true); }

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

PathwayMask random_binary_mask(const std::vector<LayerSpec>& specs, double keep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(keep);
  std::vector<Tensor> masks;
  for (const auto& s : specs) {
    Tensor t(s.shape());
    for (double& v : t.values()) v = b(rng) ? 1.0 : 0.0;
    masks.push_back(std::move(t));
  }
  return PathwayMask(std::move(masks));
}

double central_difference(const std::function<double(const Tensor&)>& f, Tensor x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("genpath_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

namespace {

Desk build_desk() {
  const auto start = std::chrono::steady_clock::now();
  Desk d{io::load_dataset({"two-blob", "", "train", 0, 7}),
         io::load_dataset({"two-blob", "", "test", 0, 7}),
         make_architecture("toy3", 2, 1),
         0,
         0,
         Generator(GeneratorConfig{}, std::vector<LayerSpec>{{1, 1, 1}}),
         kDeskBeta,
         kDeskEpochs,
         0,
         {}};
  d.model_train_accuracy = fit_classifier(d.model, d.train.images, d.train.labels, {5, 32, 2e-3, 1});
  d.model_test_accuracy = classification_accuracy(d.model, d.test.images, d.test.labels);

  GeneratorConfig gc;
  gc.seed = 3;
  d.generator = Generator(gc, d.model.layer_specs());
  TrainConfig tc;
  tc.alpha = 1.0;
  tc.beta = kDeskBeta;
  tc.learning_rate = kDeskLearningRate;
  tc.epochs = kDeskEpochs;
  tc.seed = 5;
  train(d.model, d.generator, d.train.images, tc);
  d.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  d.pathways = generate_pathways(d.model, d.test.images, d.generator, Mode::kEval);
  return d;
}

}  // namespace

const Desk& desk() {
  static const Desk d = build_desk();
  return d;
}

}  // namespace fixtures
