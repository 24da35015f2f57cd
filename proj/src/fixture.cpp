// SPDX-License-Identifier: Apache-2.0
#include "genpath/fixture.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "genpath/errors.hpp"
#include "genpath/training.hpp"

namespace genpath {

double fit_classifier(TargetModel& model, const Tensor& images, const std::vector<int>& labels,
                      const FitConfig& config) {
  const std::size_t n = images.dim(0);
  if (labels.size() != n) throw ShapeError("fit_classifier: label count does not match the images");
  model.set_trainable(true);
  Adam optimizer(model.trainable_parameters(), config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  const std::size_t classes = model.num_classes();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      std::vector<Tensor> samples;
      Tensor target({count, classes});
      for (std::size_t i = 0; i < count; ++i) {
        samples.push_back(images.slice(order[start + i]));
        target[i * classes + static_cast<std::size_t>(labels[order[start + i]])] = 1.0;
      }
      optimizer.zero_grad();
      const TracedForward f = trace_forward(model, ad::constant(Tensor::stack(samples)), {});
      ad::backward(ad::soft_cross_entropy(f.logits, target));
      optimizer.step();
    }
  }
  model.set_trainable(false);
  return classification_accuracy(model, images, labels);
}

double classification_accuracy(const TargetModel& model, const Tensor& images, const std::vector<int>& labels) {
  const Tensor logits = capture_activations(model, images).logits;
  const std::size_t classes = model.num_classes();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::span<const double> row(logits.data() + i * classes, classes);
    correct += argmax(row) == static_cast<std::size_t>(labels[i]);
  }
  return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace genpath
