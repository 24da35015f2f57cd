// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fits small target classifiers so desk-scale experiments have a trained
// model to explain. This is test and demo plumbing: the toolkit itself never
// updates a target model.

#include <cstdint>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath {

struct FitConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
};

// Hard-label cross-entropy with Adam. Returns the final training accuracy
// in [0, 1]. The model is frozen again on return.
double fit_classifier(TargetModel& model, const Tensor& images, const std::vector<int>& labels, const FitConfig& config);

// Fraction of samples whose argmax logit equals the label.
double classification_accuracy(const TargetModel& model, const Tensor& images, const std::vector<int>& labels);

}  // namespace genpath
