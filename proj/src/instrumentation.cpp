// SPDX-License-Identifier: Apache-2.0
#include "genpath/instrumentation.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>

#include "genpath/errors.hpp"

namespace genpath {

std::size_t total_size(std::span<const LayerSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) n += s.size();
  return n;
}

// ---- TargetModel -------------------------------------------------------------

TargetModel::TargetModel(std::string architecture, Shape input_shape, std::size_t num_classes)
    : architecture_(std::move(architecture)), input_shape_(std::move(input_shape)), num_classes_(num_classes) {
  if (input_shape_.size() != 3) throw ConfigError("model input shape must be (c, h, w)");
  if (num_classes_ == 0) throw ConfigError("model must have at least one class");
}

ConvStage& TargetModel::add_conv(Tensor weight, Tensor bias, ad::Conv2dOptions conv, std::size_t pool_kernel,
                                 std::size_t pool_stride) {
  ConvStage stage;
  stage.weight = ad::constant(std::move(weight));
  stage.bias = ad::constant(std::move(bias));
  stage.conv = conv;
  stage.pool_kernel = pool_kernel;
  stage.pool_stride = pool_stride == 0 ? pool_kernel : pool_stride;
  conv_.push_back(std::move(stage));
  finalized_ = false;
  return conv_.back();
}

void TargetModel::set_batch_norm(std::size_t stage, BatchNormParams params) {
  ConvStage& s = conv_.at(stage);
  const std::size_t c = s.weight.shape()[0];
  for (const Tensor* t : {&params.gamma, &params.beta, &params.running_mean, &params.running_var}) {
    if (t->size() != c) throw ShapeError("batch norm parameters do not match conv stage channels");
  }
  s.has_batch_norm = true;
  s.batch_norm = std::move(params);
}

DenseStage& TargetModel::add_dense(Tensor weight, Tensor bias, bool relu) {
  dense_.push_back(DenseStage{ad::constant(std::move(weight)), ad::constant(std::move(bias)), relu});
  finalized_ = false;
  return dense_.back();
}

void TargetModel::finalize() {
  if (conv_.empty()) throw ConfigError("model '" + architecture_ + "' has zero capture points");
  specs_.clear();
  std::size_t c = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const ConvStage& s = conv_[i];
    const Shape& ws = s.weight.shape();
    if (ws.size() != 4 || ws[1] != c) {
      throw ConfigError("conv stage " + std::to_string(i) + " weight " + to_string(ws) + " does not accept " +
                        std::to_string(c) + " channels");
    }
    if (s.bias.value().size() != ws[0]) throw ConfigError("conv stage " + std::to_string(i) + " bias size");
    const std::size_t ph = h + 2 * s.conv.pad, pw = w + 2 * s.conv.pad;
    if (ph < ws[2] || pw < ws[3]) throw ConfigError("conv stage " + std::to_string(i) + " kernel exceeds input");
    c = ws[0];
    h = (ph - ws[2]) / s.conv.stride + 1;
    w = (pw - ws[3]) / s.conv.stride + 1;
    specs_.push_back(LayerSpec{c, h, w});
    if (s.pool_kernel) {
      if (h < s.pool_kernel || w < s.pool_kernel) throw ConfigError("pooling exceeds feature map");
      h = (h - s.pool_kernel) / s.pool_stride + 1;
      w = (w - s.pool_kernel) / s.pool_stride + 1;
    }
  }
  std::size_t features = c * h * w;
  for (std::size_t j = 0; j < dense_.size(); ++j) {
    const Shape& ws = dense_[j].weight.shape();
    if (ws.size() != 2 || ws[1] != features) {
      throw ConfigError("dense stage " + std::to_string(j) + " expects " + std::to_string(features) + " inputs");
    }
    features = ws[0];
  }
  if (features != num_classes_) {
    throw ConfigError("model head emits " + std::to_string(features) + " logits, expected " +
                      std::to_string(num_classes_));
  }
  finalized_ = true;
}

std::vector<std::pair<std::string, Tensor>> TargetModel::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const std::string p = "conv" + std::to_string(i);
    out.emplace_back(p + ".weight", conv_[i].weight.value());
    out.emplace_back(p + ".bias", conv_[i].bias.value());
    if (conv_[i].has_batch_norm) {
      const auto& bn = conv_[i].batch_norm;
      out.emplace_back(p + ".bn.gamma", bn.gamma);
      out.emplace_back(p + ".bn.beta", bn.beta);
      out.emplace_back(p + ".bn.running_mean", bn.running_mean);
      out.emplace_back(p + ".bn.running_var", bn.running_var);
    }
  }
  for (std::size_t j = 0; j < dense_.size(); ++j) {
    const std::string p = "fc" + std::to_string(j);
    out.emplace_back(p + ".weight", dense_[j].weight.value());
    out.emplace_back(p + ".bias", dense_[j].bias.value());
  }
  return out;
}

void TargetModel::assign(const std::string& name, const Tensor& value) {
  auto check = [&](const Tensor& dst) {
    if (dst.shape() != value.shape()) {
      throw ShapeError("parameter " + name + " expects " + to_string(dst.shape()) + ", got " +
                       to_string(value.shape()));
    }
  };
  auto put = [&](Tensor& dst) {
    check(dst);
    dst = value;
  };
  // Vars are replaced rather than written through, so copies of the model
  // never observe the change.
  auto put_var = [&](ad::Var& dst) {
    check(dst.value());
    dst = dst.requires_grad() ? ad::parameter(value) : ad::constant(value);
  };
  const auto dot = name.find('.');
  if (dot == std::string::npos) throw ConfigError("unknown parameter " + name);
  const std::string head = name.substr(0, dot), field = name.substr(dot + 1);
  try {
    if (head.rfind("conv", 0) == 0) {
      ConvStage& s = conv_.at(std::stoul(head.substr(4)));
      if (field == "weight") return put_var(s.weight);
      if (field == "bias") return put_var(s.bias);
      if (s.has_batch_norm) {
        if (field == "bn.gamma") return put(s.batch_norm.gamma);
        if (field == "bn.beta") return put(s.batch_norm.beta);
        if (field == "bn.running_mean") return put(s.batch_norm.running_mean);
        if (field == "bn.running_var") return put(s.batch_norm.running_var);
      }
    } else if (head.rfind("fc", 0) == 0) {
      DenseStage& s = dense_.at(std::stoul(head.substr(2)));
      if (field == "weight") return put_var(s.weight);
      if (field == "bias") return put_var(s.bias);
    }
  } catch (const std::logic_error&) {
    // fall through: out_of_range / invalid_argument from the index parse
  }
  throw ConfigError("unknown parameter " + name + " for architecture " + architecture_);
}

std::uint32_t TargetModel::checksum() const {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& [name, t] : named_tensors()) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(name.data()), static_cast<uInt>(name.size()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data()), static_cast<uInt>(t.size() * sizeof(double)));
  }
  return static_cast<std::uint32_t>(crc);
}

void TargetModel::set_trainable(bool trainable) {
  auto rewrap = [trainable](ad::Var& v) {
    Tensor t = v.value();
    v = trainable ? ad::parameter(std::move(t)) : ad::constant(std::move(t));
  };
  for (auto& s : conv_) {
    rewrap(s.weight);
    rewrap(s.bias);
  }
  for (auto& s : dense_) {
    rewrap(s.weight);
    rewrap(s.bias);
  }
}

std::vector<ad::Var> TargetModel::trainable_parameters() const {
  std::vector<ad::Var> out;
  for (const auto& s : conv_) {
    out.push_back(s.weight);
    out.push_back(s.bias);
  }
  for (const auto& s : dense_) {
    out.push_back(s.weight);
    out.push_back(s.bias);
  }
  return out;
}

// ---- ActivationSet / PathwayMask ----------------------------------------------

ActivationSet ActivationSet::sample(std::size_t index) const {
  if (!batched()) {
    if (index != 0) throw ShapeError("unbatched activation set has a single sample");
    return *this;
  }
  ActivationSet out;
  for (const auto& t : layers) out.layers.push_back(t.slice(index));
  return out;
}

PathwayMask::PathwayMask(std::vector<Tensor> masks) : masks_(std::move(masks)) {
  firing_sparsity_ = recompute_firing_sparsity();
}

PathwayMask PathwayMask::ones(std::span<const LayerSpec> specs) {
  std::vector<Tensor> m;
  for (const auto& s : specs) m.push_back(Tensor::ones(s.shape()));
  return PathwayMask(std::move(m));
}

PathwayMask PathwayMask::zeros(std::span<const LayerSpec> specs) {
  std::vector<Tensor> m;
  for (const auto& s : specs) m.push_back(Tensor::zeros(s.shape()));
  return PathwayMask(std::move(m));
}

bool PathwayMask::is_binary() const {
  for (const auto& t : masks_) {
    for (double v : t.values()) {
      if (v != 0.0 && v != 1.0) return false;
    }
  }
  return true;
}

std::size_t PathwayMask::total_size() const {
  std::size_t n = 0;
  for (const auto& t : masks_) n += t.size();
  return n;
}

std::size_t PathwayMask::kept_count() const {
  std::size_t n = 0;
  for (const auto& t : masks_) n += static_cast<std::size_t>(std::count(t.values().begin(), t.values().end(), 1.0));
  return n;
}

double PathwayMask::recompute_firing_sparsity() const {
  std::size_t zeros = 0, total = 0;
  for (const auto& t : masks_) {
    zeros += static_cast<std::size_t>(std::count(t.values().begin(), t.values().end(), 0.0));
    total += t.size();
  }
  return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

std::vector<double> PathwayMask::layer_sparsity() const {
  std::vector<double> out;
  for (const auto& t : masks_) {
    const auto zeros = std::count(t.values().begin(), t.values().end(), 0.0);
    out.push_back(t.size() ? static_cast<double>(zeros) / static_cast<double>(t.size()) : 0.0);
  }
  return out;
}

std::vector<double> PathwayMask::flatten() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const auto& t : masks_) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

PathwayMask PathwayMask::unflatten(std::span<const double> values, std::span<const LayerSpec> specs) {
  if (values.size() != genpath::total_size(specs)) throw ShapeError("flat mask size does not match layer specs");
  std::vector<Tensor> m;
  std::size_t off = 0;
  for (const auto& s : specs) {
    m.emplace_back(s.shape(), std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(off),
                                                  values.begin() + static_cast<std::ptrdiff_t>(off + s.size())));
    off += s.size();
  }
  return PathwayMask(std::move(m));
}

void PathwayMask::require_matches(std::span<const LayerSpec> specs, const char* what) const {
  if (masks_.size() != specs.size()) {
    throw ShapeError(std::string(what) + ": mask has " + std::to_string(masks_.size()) + " layers, model has " +
                     std::to_string(specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (masks_[i].shape() != specs[i].shape()) {
      throw ShapeError(std::string(what) + ": layer " + std::to_string(i) + " mask " + to_string(masks_[i].shape()) +
                       " vs activation " + to_string(specs[i].shape()));
    }
  }
}

PathwayMask PathwayMask::complement() const {
  std::vector<Tensor> m = masks_;
  for (auto& t : m) {
    for (double& v : t.values()) v = 1.0 - v;
  }
  return PathwayMask(std::move(m));
}

// ---- forward passes -------------------------------------------------------------

Tensor as_batch(const TargetModel& model, const Tensor& input) {
  const Shape& want = model.input_shape();
  if (input.rank() == 3 && input.shape() == want) return input.reshaped({1, want[0], want[1], want[2]});
  if (input.rank() == 4 && Shape(input.shape().begin() + 1, input.shape().end()) == want) return input;
  throw ShapeError("model '" + model.architecture() + "' expects input " + to_string(want) + ", got " +
                   to_string(input.shape()));
}

namespace {

ad::Var conv_stage(const ConvStage& s, ad::Var x) {
  x = ad::conv2d(x, s.weight, s.bias, s.conv);
  if (s.has_batch_norm) {
    const auto& bn = s.batch_norm;
    Tensor scale(bn.gamma.shape()), shift(bn.gamma.shape());
    for (std::size_t c = 0; c < scale.size(); ++c) {
      scale[c] = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.eps);
      shift[c] = bn.beta[c] - bn.running_mean[c] * scale[c];
    }
    x = ad::channel_affine(x, ad::constant(std::move(scale)), ad::constant(std::move(shift)));
  }
  return ad::relu(x);
}

ad::Var dense_head(const TargetModel& model, ad::Var x) {
  const std::size_t n = x.shape()[0];
  x = ad::reshape(x, {n, x.value().size() / n});
  for (const DenseStage& d : model.dense_stages()) {
    x = ad::linear(x, d.weight, d.bias);
    if (d.relu) x = ad::relu(x);
  }
  return x;
}

}  // namespace

TracedForward trace_forward(const TargetModel& model, const ad::Var& input, std::span<const ad::Var> masks) {
  if (model.layer_specs().empty()) throw ConfigError("model has zero capture points (not finalized?)");
  if (!masks.empty() && masks.size() != model.num_layers()) {
    throw ShapeError("mask has " + std::to_string(masks.size()) + " layers, model has " +
                     std::to_string(model.num_layers()));
  }
  TracedForward out;
  ad::Var x = input;
  const auto& stages = model.conv_stages();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const ConvStage& s = stages[i];
    x = conv_stage(s, x);
    out.activations.push_back(x);
    if (!masks.empty()) {
      if (masks[i].shape() != x.shape()) {
        throw ShapeError("layer " + std::to_string(i) + " mask " + to_string(masks[i].shape()) + " vs activation " +
                         to_string(x.shape()));
      }
      x = ad::mul(x, masks[i]);
    }
    out.masked.push_back(x);
    if (s.pool_kernel) x = ad::max_pool2d(x, s.pool_kernel, s.pool_stride);
  }
  out.logits = dense_head(model, x);
  return out;
}

ad::Var forward_from_layer(const TargetModel& model, std::size_t layer, const ad::Var& activation) {
  const auto& stages = model.conv_stages();
  if (layer >= stages.size()) throw ConfigError("capture point " + std::to_string(layer) + " out of range");
  const Shape& s = activation.shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != model.layer_specs()[layer].shape()) {
    throw ShapeError("layer " + std::to_string(layer) + " expects " + to_string(model.layer_specs()[layer].shape()) +
                     ", got " + to_string(s));
  }
  ad::Var x = activation;
  if (stages[layer].pool_kernel) x = ad::max_pool2d(x, stages[layer].pool_kernel, stages[layer].pool_stride);
  for (std::size_t i = layer + 1; i < stages.size(); ++i) {
    x = conv_stage(stages[i], x);
    if (stages[i].pool_kernel) x = ad::max_pool2d(x, stages[i].pool_kernel, stages[i].pool_stride);
  }
  return dense_head(model, x);
}

namespace {

Tensor unbatch_logits(const Tensor& logits, bool batched) {
  return batched ? logits : logits.reshaped({logits.dim(1)});
}

std::vector<ad::Var> broadcast_mask(const PathwayMask& mask, std::size_t n) {
  std::vector<ad::Var> out;
  for (const auto& t : mask.masks()) {
    if (n == 1) {
      Shape s{1};
      s.insert(s.end(), t.shape().begin(), t.shape().end());
      out.push_back(ad::constant(t.reshaped(s)));
    } else {
      std::vector<Tensor> copies(n, t);
      out.push_back(ad::constant(Tensor::stack(copies)));
    }
  }
  return out;
}

}  // namespace

Capture capture_activations(const TargetModel& model, const Tensor& input) {
  const bool batched = input.rank() == 4;
  const Tensor x = as_batch(model, input);
  TracedForward t = trace_forward(model, ad::constant(x), {});
  Capture out;
  out.logits = unbatch_logits(t.logits.value(), batched);
  for (const auto& a : t.activations) {
    out.activations.layers.push_back(batched ? a.value() : a.value().slice(0));
  }
  return out;
}

Tensor masked_forward(const TargetModel& model, const Tensor& input, const PathwayMask& mask) {
  mask.require_matches(model.layer_specs(), "masked_forward");
  const bool batched = input.rank() == 4;
  const Tensor x = as_batch(model, input);
  const auto masks = broadcast_mask(mask, x.dim(0));
  return unbatch_logits(trace_forward(model, ad::constant(x), masks).logits.value(), batched);
}

Tensor masked_forward(const TargetModel& model, const Tensor& inputs, std::span<const PathwayMask> masks) {
  const Tensor x = as_batch(model, inputs);
  if (masks.size() != x.dim(0)) {
    throw ShapeError("masked_forward: " + std::to_string(masks.size()) + " masks for " + std::to_string(x.dim(0)) +
                     " samples");
  }
  std::vector<ad::Var> vars;
  for (std::size_t layer = 0; layer < model.num_layers(); ++layer) {
    std::vector<Tensor> per_sample;
    for (const auto& m : masks) {
      m.require_matches(model.layer_specs(), "masked_forward");
      per_sample.push_back(m.layer(layer));
    }
    vars.push_back(ad::constant(Tensor::stack(per_sample)));
  }
  return trace_forward(model, ad::constant(x), vars).logits.value();
}

MaskedGradients masked_gradients(const TargetModel& model, const Tensor& input, const PathwayMask& mask,
                                 std::size_t class_index) {
  if (class_index >= model.num_classes()) {
    throw ConfigError("class index " + std::to_string(class_index) + " out of range for " +
                      std::to_string(model.num_classes()) + " classes");
  }
  mask.require_matches(model.layer_specs(), "masked_gradients");
  if (!mask.is_binary()) throw ConfigError("masked_gradients requires a finalized binary mask");
  if (input.rank() != 3) throw ShapeError("masked_gradients takes a single (c, h, w) input");

  ad::Var x = ad::parameter(as_batch(model, input));
  const auto masks = broadcast_mask(mask, 1);
  TracedForward t = trace_forward(model, x, masks);

  // Gradients are read off the post-mask nodes and multiplied by the mask,
  // which is exactly the gradient with respect to the pre-mask activation.
  Tensor seed = Tensor::zeros(t.logits.shape());
  seed[class_index] = 1.0;
  ad::backward(t.logits, seed);

  MaskedGradients out;
  out.logits = t.logits.value().reshaped({model.num_classes()});
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    Tensor g = t.masked[i].has_grad() ? t.masked[i].grad().slice(0) : Tensor::zeros(model.layer_specs()[i].shape());
    const Tensor& m = mask.layer(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = m[j] == 0.0 ? 0.0 : g[j] * m[j];
    out.layer_grads.push_back(std::move(g));
    out.activations.push_back(t.activations[i].value().slice(0));
  }
  out.input_grad = x.has_grad() ? x.grad().slice(0) : Tensor::zeros(model.input_shape());
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) z += (v = std::exp(v - m));
  for (double& v : p) v /= z;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace genpath
