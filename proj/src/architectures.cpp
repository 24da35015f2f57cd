// SPDX-License-Identifier: Apache-2.0
#include "genpath/architectures.hpp"

#include <cmath>
#include <random>

#include "genpath/errors.hpp"

namespace genpath {
namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

void conv(TargetModel& m, std::size_t in, std::size_t out, std::size_t k, ad::Conv2dOptions opt,
          std::size_t pool, std::mt19937_64& rng) {
  m.add_conv(he_normal({out, in, k, k}, in * k * k, rng), Tensor::zeros({out}), opt, pool, pool);
}

void dense(TargetModel& m, std::size_t in, std::size_t out, bool relu, std::mt19937_64& rng) {
  m.add_dense(he_normal({out, in}, in, rng), Tensor::zeros({out}), relu);
}

TargetModel alexnet32(std::size_t classes, std::mt19937_64& rng) {
  TargetModel m("alexnet32", {3, 32, 32}, classes);
  conv(m, 3, 64, 11, {4, 5}, 2, rng);
  conv(m, 64, 192, 5, {1, 2}, 2, rng);
  conv(m, 192, 384, 3, {1, 1}, 0, rng);
  conv(m, 384, 256, 3, {1, 1}, 0, rng);
  conv(m, 256, 256, 3, {1, 1}, 2, rng);
  dense(m, 256, classes, false, rng);
  return m;
}

TargetModel vgg11bn32(std::size_t classes, std::mt19937_64& rng) {
  TargetModel m("vgg11bn32", {3, 32, 32}, classes);
  // channel plan with 0 marking a max-pool after the previous conv
  const int plan[] = {64, 0, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0};
  std::size_t in = 3;
  std::vector<std::size_t> widths;
  std::vector<bool> pooled;
  for (int v : plan) {
    if (v == 0) {
      pooled.back() = true;
    } else {
      widths.push_back(static_cast<std::size_t>(v));
      pooled.push_back(false);
    }
  }
  for (std::size_t i = 0; i < widths.size(); ++i) {
    conv(m, in, widths[i], 3, {1, 1}, pooled[i] ? 2 : 0, rng);
    BatchNormParams bn{Tensor::ones({widths[i]}), Tensor::zeros({widths[i]}), Tensor::zeros({widths[i]}),
                       Tensor::ones({widths[i]}), 1e-5};
    m.set_batch_norm(i, std::move(bn));
    in = widths[i];
  }
  dense(m, 512, classes, false, rng);
  return m;
}

TargetModel toy3(std::size_t classes, std::mt19937_64& rng) {
  TargetModel m("toy3", {3, 16, 16}, classes);
  conv(m, 3, 8, 3, {1, 1}, 2, rng);
  conv(m, 8, 16, 3, {1, 1}, 2, rng);
  conv(m, 16, 16, 3, {1, 1}, 0, rng);
  dense(m, 16 * 4 * 4, classes, false, rng);
  return m;
}

}  // namespace

std::vector<std::string> architecture_names() { return {"alexnet32", "vgg11bn32", "toy3"}; }

TargetModel make_architecture(const std::string& name, std::size_t num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TargetModel m;
  if (name == "alexnet32") {
    m = alexnet32(num_classes ? num_classes : 10, rng);
  } else if (name == "vgg11bn32") {
    m = vgg11bn32(num_classes ? num_classes : 10, rng);
  } else if (name == "toy3") {
    m = toy3(num_classes ? num_classes : 2, rng);
  } else {
    throw ConfigError("unknown architecture '" + name + "' (expected alexnet32, vgg11bn32 or toy3)");
  }
  m.finalize();
  return m;
}

}  // namespace genpath
