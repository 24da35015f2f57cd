// SPDX-License-Identifier: Apache-2.0
#pragma once

// Faithfulness metrics over masked predictions, class-overlap (acIOU), the
// remove-and-predict benchmark, class pathways and their transfer, embedding
// variance statistics and class activation maps restricted to a pathway.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genpath/baselines.hpp"
#include "genpath/instrumentation.hpp"

namespace genpath {

// One evaluated sample. Confidences are the probabilities both models give
// to the original model's predicted class.
struct PredictionRecord {
  std::vector<double> original_probs;
  std::vector<double> masked_probs;
  std::size_t original_class = 0;
  std::size_t masked_class = 0;
  std::optional<std::size_t> label;

  double confidence() const { return original_probs.at(original_class); }
  double masked_confidence() const { return masked_probs.at(original_class); }
};

PredictionRecord make_record(std::span<const double> original_logits, std::span<const double> masked_logits,
                             std::optional<std::size_t> label = std::nullopt);

enum class Reference { kModel, kLabel };

// All metrics are percentages over the n given records.
double accuracy(std::span<const PredictionRecord> records, Reference reference = Reference::kModel);
double mic(std::span<const PredictionRecord> records);
double mdc(std::span<const PredictionRecord> records);
double icr(std::span<const PredictionRecord> records);

struct FaithfulnessSummary {
  double accuracy = 0, mic = 0, mdc = 0, icr = 0;
};
FaithfulnessSummary summarize(std::span<const PredictionRecord> records, Reference reference = Reference::kModel);

// |a & b| / |a | b| over nonzero entries; 0 when the union is empty.
double mask_iou(const PathwayMask& a, const PathwayMask& b);

struct AciouResult {
  double value = 0;          // mean over classes of the mean pairwise IOU, x100
  double paper_literal = 0;  // sum_c sum_{i != j} IOU / (2 n_c), x100
  std::map<int, double> per_class;
  std::size_t empty_union_pairs = 0;
};

// Classes with fewer than two samples have no pairs and are skipped.
AciouResult aciou(std::span<const PathwayMask> masks, std::span<const int> classes);

// ---- remove and predict ----------------------------------------------------------

// Accuracy (x100) after zeroing each sample's pathway, i.e. running the
// complement mask. Reference predictions are the unmasked model's unless
// labels are given.
double removal_accuracy(const TargetModel& model, const Tensor& inputs, std::span<const PathwayMask> pathways,
                        std::span<const int> labels = {});

struct RoapPoint {
  double sparsity = 0;
  double accuracy = 0;
};

// For every grid sparsity each sample's scores are re-thresholded into a
// pathway (per layer by default) which is then removed.
std::vector<RoapPoint> roap(const TargetModel& model, const Tensor& inputs, std::span<const ScoreField> scores,
                            std::span<const double> grid, Scope scope = Scope::kPerLayer,
                            std::span<const int> labels = {});

// Uniform random scores; thresholding them gives random_mask-style pathways.
ScoreField random_scores(std::span<const LayerSpec> specs, std::uint64_t seed);

// ---- class pathways ---------------------------------------------------------------

struct ClassPathway {
  int class_id = 0;
  PathwayMask mask;
  double eps_ss = 0, eps_cn = 0;
  std::vector<std::size_t> sample_ids;  // ascending
  std::vector<Tensor> firing_rate;      // B, per layer
};

// P_c = 1[B > eps_cn] elementwise.
PathwayMask class_indicator(std::span<const Tensor> firing_rate, double eps_cn);

// Draws round((1 - eps_ss) n) of the class's samples (at least one) with
// `seed`, averages their masks into B and thresholds at eps_cn. `ids` are
// the sample identifiers of `masks`, recorded in the result.
ClassPathway build_class_pathway(int class_id, std::span<const PathwayMask> masks, std::span<const std::size_t> ids,
                                 double eps_ss, double eps_cn, std::uint64_t seed);

// Runs every sample through its class's pathway.
std::vector<PredictionRecord> transfer_eval(const TargetModel& model, const Tensor& inputs,
                                            std::span<const int> classes,
                                            const std::map<int, ClassPathway>& pathways,
                                            std::span<const int> labels = {});

// ---- embedding statistics --------------------------------------------------------------

struct VarianceStats {
  double within = 0;   // mean over classes of the mean squared distance to the class centroid
  double between = 0;  // mean squared distance of class centroids to the global centroid
};

VarianceStats class_variance_stats(const std::vector<std::vector<double>>& embeddings, std::span<const int> classes);
// (b - a) / a * 100.
double percent_delta(double a, double b);

// ---- class activation maps --------------------------------------------------------------

// Grad-CAM at the last capture point using masked activations and masked
// gradients, bilinearly upsampled to the input resolution and divided by
// its maximum. Returns (h, w) in [0, 1].
Tensor cam_on_pathway(const TargetModel& model, const Tensor& input, const PathwayMask& mask, std::size_t class_index);

// ---- reports ------------------------------------------------------------------------

struct MetricReport {
  static constexpr int kSchemaVersion = 1;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> config;
  std::map<std::string, std::vector<double>> series;  // per-layer breakdowns, curves
  std::vector<PredictionRecord> records;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

}  // namespace genpath
