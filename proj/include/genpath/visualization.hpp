// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath {

// Input-gradient saliency of the masked model: max over channels of
// |d logit[class] / d x|, divided by its maximum. (h, w) in [0, 1]; all
// zero when the gradient vanishes.
Tensor pathway_saliency(const TargetModel& model, const Tensor& input, const PathwayMask& mask,
                        std::size_t class_index);

// Projection onto the two leading principal axes (power iteration with
// deflation, deterministic start). Any 2-D projection could stand in here;
// the variance statistics are computed on the raw embeddings.
std::vector<std::array<double, 2>> project_2d(const std::vector<std::vector<double>>& embeddings);

}  // namespace genpath
