// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "genpath/architectures.hpp"
#include "genpath/errors.hpp"
#include "genpath/instrumentation.hpp"
#include "support/fixtures.hpp"

using namespace genpath;
using fixtures::random_tensor;

namespace {

std::size_t conv_out(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  return (n + 2 * pad - k) / stride + 1;
}

// Two 1x1 feature channels on a 1x1 input, read by a 1-output head.
TargetModel two_neuron_model() {
  TargetModel m("two_neuron", {1, 1, 1}, 1);
  m.add_conv(Tensor({2, 1, 1, 1}, std::vector<double>{2.0, 3.0}), Tensor({2}, std::vector<double>{1.0, -1.0}), {});
  m.add_dense(Tensor({1, 2}, std::vector<double>{5.0, 7.0}), Tensor({1}, 0.5), false);
  m.finalize();
  return m;
}

}  // namespace

TEST_CASE("zero network yields zero activations and logits") {
  TargetModel m = fixtures::tiny3(1);
  for (auto& [name, t] : m.named_tensors()) m.assign(name, Tensor(t.shape()));
  const Capture c = capture_activations(m, random_tensor({2, 6, 6}, 2));
  for (const Tensor& a : c.activations.layers)
    for (double v : a.values()) CHECK(v == 0.0);
  for (double v : c.logits.values()) CHECK(v == 0.0);
}

TEST_CASE("single 1x1 convolution hand evaluation") {
  const TargetModel m = fixtures::one_conv_model(2.0, 0.0);
  const Capture c = capture_activations(m, Tensor({1, 1, 1}, 3.0));
  CHECK(c.activations.layers[0][0] == 6.0);
  CHECK(c.logits[0] == 6.0);
}

TEST_CASE("alexnet32 capture shapes follow the architecture") {
  const TargetModel m = make_architecture("alexnet32", 10, 1);
  // (out channels, kernel, stride, pad, pool after)
  const std::size_t plan[5][5] = {{64, 11, 4, 5, 2}, {192, 5, 1, 2, 2}, {384, 3, 1, 1, 0}, {256, 3, 1, 1, 0},
                                  {256, 3, 1, 1, 2}};
  std::size_t size = 32;
  REQUIRE(m.num_layers() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    size = conv_out(size, plan[i][1], plan[i][2], plan[i][3]);
    CHECK(m.layer_specs()[i] == LayerSpec{plan[i][0], size, size});
    if (plan[i][4]) size /= plan[i][4];
  }
  const Capture c = capture_activations(m, random_tensor({3, 32, 32}, 3));
  for (std::size_t i = 0; i < 5; ++i) CHECK(c.activations.layers[i].shape() == m.layer_specs()[i].shape());
}

TEST_CASE("shape errors") {
  const TargetModel m = fixtures::tiny3(1);
  CHECK_THROWS_AS(capture_activations(m, Tensor({3, 6, 6})), ShapeError);
  CHECK_THROWS_AS(masked_forward(m, Tensor({2, 6, 6}), PathwayMask::ones(std::vector<LayerSpec>{{1, 1, 1}})),
                  ConfigError);
  TargetModel empty("empty", {1, 2, 2}, 1);
  empty.add_dense(Tensor({1, 4}), Tensor({1}), false);
  CHECK_THROWS_AS(empty.finalize(), ConfigError);
}

TEST_CASE("identity mask reproduces the plain logits exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TargetModel m = fixtures::tiny3(seed);
    const Tensor x = random_tensor({2, 6, 6}, seed + 10);
    const Tensor plain = capture_activations(m, x).logits;
    CHECK(masked_forward(m, x, PathwayMask::ones(m.layer_specs())) == plain);
  }
}

TEST_CASE("all-zero mask matches a forward with every capture zeroed") {
  const TargetModel m = fixtures::tiny3(4);
  const Tensor x = random_tensor({2, 6, 6}, 5);
  const Tensor logits = masked_forward(m, x, PathwayMask::zeros(m.layer_specs()));
  // with the last capture zeroed only the head bias survives
  const Tensor& bias = m.dense_stages()[0].bias.value();
  for (std::size_t k = 0; k < 2; ++k) CHECK(logits[k] == bias[k]);
}

TEST_CASE("two-neuron hand calculation") {
  const TargetModel m = two_neuron_model();
  const Tensor x({1, 1, 1}, 2.0);
  // relu(2*2+1)=5, relu(3*2-1)=5
  CHECK(capture_activations(m, x).logits[0] == 5 * 5 + 7 * 5 + 0.5);
  const PathwayMask keep_first({Tensor({2, 1, 1}, std::vector<double>{1, 0})});
  CHECK(masked_forward(m, x, keep_first)[0] == 5 * 5 + 0.5);
}

TEST_CASE("masking is sequential and idempotent") {
  const TargetModel m = fixtures::tiny3(6);
  const Tensor x = random_tensor({2, 6, 6}, 7);
  const PathwayMask p = fixtures::random_binary_mask(m.layer_specs(), 0.6, 8);
  const ad::Var in = ad::constant(as_batch(m, x));
  std::vector<ad::Var> masks;
  for (const Tensor& t : p.masks()) {
    Shape s{1};
    s.insert(s.end(), t.shape().begin(), t.shape().end());
    masks.push_back(ad::constant(t.reshaped(s)));
  }
  const TracedForward t = trace_forward(m, in, masks);
  for (std::size_t i = 0; i < m.num_layers(); ++i) {
    const Tensor& a = t.activations[i].value();
    const Tensor& pa = t.masked[i].value();
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(pa[j] == p.layer(i)[j] * a[j]);
      CHECK(p.layer(i)[j] * pa[j] == pa[j]);
      CHECK(a[j] >= 0.0);
    }
  }
}

TEST_CASE("nested masks keep nested support at the first masked layer") {
  const TargetModel m = fixtures::tiny3(9);
  const Tensor x = random_tensor({2, 6, 6}, 10);
  const PathwayMask q = fixtures::random_binary_mask(m.layer_specs(), 0.7, 11);
  std::vector<Tensor> sub = q.masks();
  for (std::size_t j = 0; j < sub[0].size(); j += 3) sub[0][j] = 0.0;
  const PathwayMask p(sub);
  const Tensor a = capture_activations(m, x).activations.layers[0];
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (p.layer(0)[j] * a[j] != 0.0) CHECK(q.layer(0)[j] * a[j] != 0.0);
  }
}

TEST_CASE("masked gradients vanish off the pathway and match finite differences") {
  const TargetModel m = fixtures::tiny3(12);
  const Tensor x = random_tensor({2, 6, 6}, 13);
  const PathwayMask p = fixtures::random_binary_mask(m.layer_specs(), 0.7, 14);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const MaskedGradients g = masked_gradients(m, x, p, cls);
    for (std::size_t i = 0; i < m.num_layers(); ++i)
      for (std::size_t j = 0; j < g.layer_grads[i].size(); ++j)
        if (p.layer(i)[j] == 0.0) CHECK(g.layer_grads[i][j] == 0.0);
    auto f = [&](const Tensor& in) { return masked_forward(m, in, p)[cls]; };
    for (std::size_t j = 0; j < x.size(); ++j) {
      CHECK(std::abs(g.input_grad[j] - fixtures::central_difference(f, x, j)) < 1e-3);
    }
  }
}

TEST_CASE("masked gradient special cases") {
  const TargetModel m = fixtures::tiny3(15);
  const Tensor x = random_tensor({2, 6, 6}, 16);
  std::vector<Tensor> z = PathwayMask::ones(m.layer_specs()).masks();
  z[0].fill(0.0);
  const MaskedGradients g = masked_gradients(m, x, PathwayMask(z), 0);
  for (double v : g.input_grad.values()) CHECK(v == 0.0);

  const TargetModel one = fixtures::one_conv_model(2.0, 0.5);
  const MaskedGradients h = masked_gradients(one, Tensor({1, 1, 1}, 3.0), PathwayMask::ones(one.layer_specs()), 0);
  auto f = [&](const Tensor& in) { return capture_activations(one, in).logits[0]; };
  CHECK(h.input_grad[0] == doctest::Approx(fixtures::central_difference(f, Tensor({1, 1, 1}, 3.0), 0)));
  CHECK(h.input_grad[0] == 2.0);

  std::vector<Tensor> soft = PathwayMask::ones(m.layer_specs()).masks();
  soft[1][0] = 0.5;
  CHECK_THROWS_AS(masked_gradients(m, x, PathwayMask(soft), 0), ConfigError);
  CHECK_THROWS_AS(masked_gradients(m, x, PathwayMask::ones(m.layer_specs()), 2), ConfigError);
}

TEST_CASE("per-sample masks on a batch match single-sample passes") {
  const TargetModel m = fixtures::tiny3(17);
  std::vector<Tensor> xs{random_tensor({2, 6, 6}, 18), random_tensor({2, 6, 6}, 19)};
  std::vector<PathwayMask> ps{fixtures::random_binary_mask(m.layer_specs(), 0.5, 20),
                              fixtures::random_binary_mask(m.layer_specs(), 0.8, 21)};
  const Tensor batched = masked_forward(m, Tensor::stack(xs), ps);
  for (std::size_t i = 0; i < 2; ++i) {
    const Tensor single = masked_forward(m, xs[i], ps[i]);
    for (std::size_t k = 0; k < 2; ++k) CHECK(batched.slice(i)[k] == doctest::Approx(single[k]).epsilon(1e-12));
  }
}

TEST_CASE("pathway mask bookkeeping") {
  const std::vector<LayerSpec> specs{{1, 2, 2}, {2, 1, 1}};
  const PathwayMask p = PathwayMask::unflatten(std::vector<double>{1, 0, 0, 1, 0, 0}, specs);
  CHECK(p.firing_sparsity() == doctest::Approx(4.0 / 6.0));
  CHECK(std::abs(p.firing_sparsity() - p.recompute_firing_sparsity()) < 1e-12);
  CHECK(p.kept_count() == 2);
  CHECK(p.complement().kept_count() == 4);
  CHECK(p.flatten() == std::vector<double>{1, 0, 0, 1, 0, 0});
  CHECK(p.layer_sparsity() == std::vector<double>{0.5, 1.0});
}

TEST_CASE("forward_from_layer resumes the plain pass") {
  const TargetModel m = fixtures::tiny3(22);
  const Tensor x = random_tensor({2, 6, 6}, 23);
  const Capture c = capture_activations(m, x);
  for (std::size_t i = 0; i < m.num_layers(); ++i) {
    Shape s{1};
    const Tensor& a = c.activations.layers[i];
    s.insert(s.end(), a.shape().begin(), a.shape().end());
    const Tensor y = forward_from_layer(m, i, ad::constant(a.reshaped(s))).value();
    for (std::size_t k = 0; k < 2; ++k) CHECK(y[k] == doctest::Approx(c.logits[k]).epsilon(1e-12));
  }
}

TEST_CASE("checksum changes with any parameter") {
  TargetModel m = fixtures::tiny3(24);
  const auto before = m.checksum();
  CHECK(m.checksum() == before);
  Tensor w = m.named_tensors()[0].second;
  w[0] += 1e-9;
  m.assign(m.named_tensors()[0].first, w);
  CHECK(m.checksum() != before);
}
