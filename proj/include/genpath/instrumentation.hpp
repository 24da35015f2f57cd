// SPDX-License-Identifier: Apache-2.0
#pragma once

// Wraps a trained convolutional classifier: captures the post-ReLU feature
// maps of every convolutional stage and re-runs the forward pass with those
// feature maps multiplied by a pathway mask.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genpath/autodiff.hpp"
#include "genpath/tensor.hpp"

namespace genpath {

struct LayerSpec {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  Shape shape() const { return {channels, height, width}; }
  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::size_t total_size(std::span<const LayerSpec> specs);

// Inference-time batch normalization parameters of one convolution stage.
struct BatchNormParams {
  Tensor gamma, beta, running_mean, running_var;
  double eps = 1e-5;
};

struct ConvStage {
  ad::Var weight;  // (out, in, kh, kw)
  ad::Var bias;    // (out)
  ad::Conv2dOptions conv;
  bool has_batch_norm = false;
  BatchNormParams batch_norm;
  std::size_t pool_kernel = 0;  // 0: no pooling after the capture point
  std::size_t pool_stride = 0;
};

struct DenseStage {
  ad::Var weight;  // (out, in)
  ad::Var bias;    // (out)
  bool relu = false;
};

// A frozen convolutional classifier. Each conv stage is
// conv -> [batch norm] -> ReLU -> (capture / mask) -> [max pool]; a dense head
// follows the flattened last feature map. Dense-head ReLUs are not capture
// points.
class TargetModel {
 public:
  TargetModel() = default;
  TargetModel(std::string architecture, Shape input_shape, std::size_t num_classes);

  ConvStage& add_conv(Tensor weight, Tensor bias, ad::Conv2dOptions conv, std::size_t pool_kernel = 0,
                      std::size_t pool_stride = 0);
  void set_batch_norm(std::size_t stage, BatchNormParams params);
  DenseStage& add_dense(Tensor weight, Tensor bias, bool relu);
  // Propagates shapes through the stages and records the capture points.
  // Throws ConfigError for an inconsistent stack or zero capture points.
  void finalize();

  const std::string& architecture() const { return architecture_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<LayerSpec>& layer_specs() const { return specs_; }
  std::size_t num_layers() const { return specs_.size(); }
  const std::vector<ConvStage>& conv_stages() const { return conv_; }
  const std::vector<DenseStage>& dense_stages() const { return dense_; }

  // Stable parameter enumeration used by checkpoints and the checksum.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  // Overwrites a parameter by name; shape must match.
  void assign(const std::string& name, const Tensor& value);
  // CRC-32 over every parameter value in enumeration order.
  std::uint32_t checksum() const;

  // Re-wraps learnable tensors as differentiable parameters (or constants).
  // Only fixture code that fits toy classifiers turns this on.
  void set_trainable(bool trainable);
  std::vector<ad::Var> trainable_parameters() const;

 private:
  std::string architecture_;
  Shape input_shape_;
  std::size_t num_classes_ = 0;
  std::vector<ConvStage> conv_;
  std::vector<DenseStage> dense_;
  std::vector<LayerSpec> specs_;
  bool finalized_ = false;
};

// Per-layer post-ReLU feature maps. Tensors are (c, h, w) for one sample or
// (n, c, h, w) for a batch.
struct ActivationSet {
  std::vector<Tensor> layers;

  std::size_t num_layers() const { return layers.size(); }
  bool batched() const { return !layers.empty() && layers[0].rank() == 4; }
  std::size_t batch_size() const { return batched() ? layers[0].dim(0) : 1; }
  ActivationSet sample(std::size_t index) const;
};

// Per-layer mask over the capture points, shape-matched to the layer specs.
// A finalized pathway holds only exact 0.0 / 1.0 values.
class PathwayMask {
 public:
  PathwayMask() = default;
  explicit PathwayMask(std::vector<Tensor> masks);

  static PathwayMask ones(std::span<const LayerSpec> specs);
  static PathwayMask zeros(std::span<const LayerSpec> specs);

  const std::vector<Tensor>& masks() const { return masks_; }
  const Tensor& layer(std::size_t i) const { return masks_.at(i); }
  std::size_t num_layers() const { return masks_.size(); }

  bool is_binary() const;
  std::size_t total_size() const;
  std::size_t kept_count() const;  // entries equal to 1.0
  // Fraction of exact zeros, cached at construction.
  double firing_sparsity() const { return firing_sparsity_; }
  double recompute_firing_sparsity() const;
  std::vector<double> layer_sparsity() const;

  // Concatenated layer values in layer order (row-major within a layer).
  std::vector<double> flatten() const;
  static PathwayMask unflatten(std::span<const double> values, std::span<const LayerSpec> specs);

  void require_matches(std::span<const LayerSpec> specs, const char* what) const;
  PathwayMask complement() const;

  friend bool operator==(const PathwayMask& a, const PathwayMask& b) { return a.masks_ == b.masks_; }

 private:
  std::vector<Tensor> masks_;
  double firing_sparsity_ = 0.0;
};

struct Capture {
  Tensor logits;  // (classes) or (n, classes)
  ActivationSet activations;
};

// Plain forward pass recording each capture point.
Capture capture_activations(const TargetModel& model, const Tensor& input);

// Forward pass where every captured layer is multiplied by the mask before
// flowing onward. A single mask applies to every sample of a batched input.
Tensor masked_forward(const TargetModel& model, const Tensor& input, const PathwayMask& mask);
// Batched input with one mask per sample.
Tensor masked_forward(const TargetModel& model, const Tensor& inputs, std::span<const PathwayMask> masks);

struct MaskedGradients {
  Tensor logits;                     // (classes)
  std::vector<Tensor> layer_grads;   // d logit[class] / d A_i, zero where the mask is zero
  std::vector<Tensor> activations;   // A_i (pre-mask)
  Tensor input_grad;                 // (c, h, w)
};

// Backpropagates one class logit through the masked forward pass. The mask
// must be binary.
MaskedGradients masked_gradients(const TargetModel& model, const Tensor& input, const PathwayMask& mask,
                                 std::size_t class_index);

// The recorded graph of one (possibly masked) forward pass; the building
// block behind the functions above and the generator's training loss.
struct TracedForward {
  ad::Var logits;                    // (n, classes)
  std::vector<ad::Var> activations;  // post-ReLU, pre-mask, (n, c, h, w)
  std::vector<ad::Var> masked;       // post-mask (same Var as activations when unmasked)
};

// `masks` is empty (no masking) or holds one (n, c, h, w) Var per layer.
TracedForward trace_forward(const TargetModel& model, const ad::Var& input, std::span<const ad::Var> masks);

// Resumes an unmasked forward pass at capture point `layer`, with the batched
// `activation` standing in for that layer's output. Returns the logits.
ad::Var forward_from_layer(const TargetModel& model, std::size_t layer, const ad::Var& activation);

// Promotes (c, h, w) to (1, c, h, w) after checking it against the model.
Tensor as_batch(const TargetModel& model, const Tensor& input);

// Softmax of a logit vector.
std::vector<double> softmax(std::span<const double> logits);
std::size_t argmax(std::span<const double> values);

}  // namespace genpath
