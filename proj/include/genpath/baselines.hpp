// SPDX-License-Identifier: Apache-2.0
#pragma once

// Competing pathway constructions: neuron importance scores (first-order
// Taylor, integrated gradients, activation magnitude), score thresholding,
// random masks and greedy pruning.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath {

// Per-layer scores shape-matched to the capture points.
struct ScoreField {
  std::string method;  // taylor | intgrad | magnitude | random | genpath | ...
  std::vector<Tensor> layers;
};

// |a * d logit[class] / d a| for every captured activation a.
ScoreField taylor_importance(const TargetModel& model, const Tensor& input, std::size_t class_index);

// Integrated gradients per capture point: for layer i the activation moves
// on the straight line from the baseline input's activation to the input's,
// the rest of the network runs forward from there, and the path integral is
// approximated with the trapezoid rule over `steps` evenly spaced points.
// An empty `baseline` means the zero image.
ScoreField intgrad_importance(const TargetModel& model, const Tensor& input, std::size_t class_index,
                              std::size_t steps = 20, const Tensor& baseline = {});

ScoreField magnitude_importance(const ActivationSet& acts);

enum class Scope { kPerLayer, kGlobal };

// Number of elements kept out of `n` at firing sparsity s: ceil((1 - s) n),
// computed with a 1e-9 guard against rounding up exact products.
std::size_t kept_count(std::size_t n, double sparsity);

// Keeps the top (1 - s) fraction by score in each layer (or across all layers
// for kGlobal). Ties go to the lower flat index. Requires s in [0, 1).
PathwayMask threshold_to_mask(const ScoreField& scores, double sparsity, Scope scope = Scope::kPerLayer);

// Exactly kept_count(N_i, s) uniformly placed ones per layer.
PathwayMask random_mask(std::span<const LayerSpec> specs, double sparsity, std::uint64_t seed);

struct GreedyResult {
  PathwayMask mask;
  double sparsity = 0;
  bool misclassified = false;  // initial prediction disagreed with the label
};

// Zeroes elements in ascending score order (global flat order, ties by
// index) in chunks of `chunk` elements (0: 1% of all elements) while the
// masked prediction stays at the original class, and returns the last mask
// that kept it. With `label` set and the unmasked model wrong, returns the
// all-ones mask with `misclassified` set.
GreedyResult greedy_prune(const TargetModel& model, const Tensor& input, const ScoreField& scores,
                          std::optional<std::size_t> label = std::nullopt, std::size_t chunk = 0);

// Scores by method name for a single input (taylor, intgrad, magnitude).
ScoreField importance_by_name(const std::string& method, const TargetModel& model, const Tensor& input,
                              std::size_t class_index);

}  // namespace genpath
