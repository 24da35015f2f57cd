// SPDX-License-Identifier: Apache-2.0
#include "genpath/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "genpath/errors.hpp"

namespace genpath {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != numel(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " + std::to_string(values_.size()) +
                     " values");
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (numel(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) {
    throw ShapeError("slice " + std::to_string(index) + " out of range for " + to_string(shape_));
  }
  Shape inner(shape_.begin() + 1, shape_.end());
  const std::size_t stride = numel(inner);
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(index * stride),
                        values_.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return Tensor(std::move(inner), std::move(v));
}

void Tensor::set_slice(std::size_t index, const Tensor& sample) {
  if (shape_.empty() || index >= shape_[0] || Shape(shape_.begin() + 1, shape_.end()) != sample.shape()) {
    throw ShapeError("cannot place " + to_string(sample.shape()) + " into " + to_string(shape_));
  }
  std::copy(sample.values_.begin(), sample.values_.end(),
            values_.begin() + static_cast<std::ptrdiff_t>(index * sample.size()));
}

Tensor Tensor::stack(std::span<const Tensor> samples) {
  if (samples.empty()) throw ShapeError("cannot stack zero tensors");
  Shape shape{samples.size()};
  shape.insert(shape.end(), samples[0].shape().begin(), samples[0].shape().end());
  Tensor out(shape);
  for (std::size_t i = 0; i < samples.size(); ++i) out.set_slice(i, samples[i]);
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

}  // namespace genpath
