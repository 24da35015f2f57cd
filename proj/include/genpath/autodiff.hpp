// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal reverse-mode differentiation over whole tensors. Each op records a
// node holding its value and a closure that pushes the node's gradient into
// its parents. Nodes that do not (transitively) depend on a parameter carry
// no closure, so inference-only passes cost nothing beyond the values.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "genpath/quantizer.hpp"
#include "genpath/tensor.hpp"

namespace genpath::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Adds g into grad, allocating zeros on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  void zero_grad() { node_->grad = Tensor(); }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Runs the recorded closures in reverse topological order starting from
// `root`, whose gradient is seeded with `seed` (same shape as root).
void backward(const Var& root, const Tensor& seed);
// Scalar root: seed 1.
void backward(const Var& root);

// ---- ops -------------------------------------------------------------------

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

// x: (n, ci, h, w); weight: (co, ci, kh, kw); bias: (co) or empty Var.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options = {});

// Transposed convolution, the adjoint of conv2d in its input.
// x: (n, ci, h, w); weight: (ci, co, kh, kw); bias: (co) or empty Var.
// Output spatial size: (h - 1) * stride - 2 * pad + kh.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options = {});

Var max_pool2d(const Var& x, std::size_t kernel, std::size_t stride);
Var relu(const Var& x);
// Elementwise product of equally shaped tensors.
Var mul(const Var& x, const Var& y);
Var add(const Var& x, const Var& y);
Var scale(const Var& x, double factor);
Var reshape(const Var& x, Shape shape);

// Joins (n, f_i) matrices along the feature axis.
Var concat_features(const std::vector<Var>& parts);
// Columns [offset, offset + count) of an (n, f) matrix.
Var slice_features(const Var& x, std::size_t offset, std::size_t count);

// x: (n, in); weight: (out, in); bias: (out) or empty Var.
Var linear(const Var& x, const Var& weight, const Var& bias);

// Per-channel y = x * scale[c] + shift[c] on (n, c, h, w).
Var channel_affine(const Var& x, const Var& scale, const Var& shift);

struct BatchStats {
  Tensor mean;
  Tensor var;  // biased
};

// Batch normalization using statistics of the current batch over (n, h, w).
// When `stats` is given it receives the batch mean and biased variance.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats = nullptr);

// Sum of squares of all elements, shape (1).
Var sum_squares(const Var& x);
// Sum of all elements, shape (1).
Var sum(const Var& x);

// Mean over the batch of the soft-target cross-entropy
// -sum_c p_target(c) * log(max(softmax(logits)(c), floor)).
// logits: (n, classes); target_probs: (n, classes), rows summing to one.
Var soft_cross_entropy(const Var& logits, const Tensor& target_probs, double floor = 1e-12);

// Elementwise differentiable quantizer (see quantizer.hpp).
Var soft_quantize(const Var& x, const QuantizerConfig& config);

}  // namespace genpath::ad
