// SPDX-License-Identifier: Apache-2.0
#pragma once

// The pathway generator. For every capture point a recursive embedder (one
// convolution reused for several iterations, each iteration with its own
// normalization) shrinks the feature map to a shared resolution; a single
// fully connected scorer reads the patterns of all layers at once; a
// recursive transposed-convolution decoder per layer restores the native
// resolution; the quantizer turns decoded scores into the mask.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genpath/autodiff.hpp"
#include "genpath/instrumentation.hpp"
#include "genpath/quantizer.hpp"

namespace genpath {

enum class Mode { kTrain, kEval };

struct GeneratorConfig {
  // Shared embedding resolution; 0 selects the smallest capture resolution.
  std::size_t shared_height = 0;
  std::size_t shared_width = 0;
  // Per-layer (height, width) filter sizes; empty selects them automatically.
  std::vector<std::pair<std::size_t, std::size_t>> filter_sizes;
  std::size_t pdn_depth = 2;
  // Hidden width of the scorer; 0 means "same as its input width".
  std::size_t pdn_hidden = 0;
  QuantizerConfig quantizer;
  bool normalization = true;
  double norm_eps = 1e-5;
  double norm_momentum = 0.1;
  // Initial scale/shift of the decoder's last normalization, which places
  // fresh decoded scores around the middle of the quantizer range.
  double decoder_gain = 0.25;
  double decoder_shift = 0.5;
  std::uint64_t seed = 0;

  // Documented "key = value" text form; `#` starts a comment.
  std::string to_text() const;
  static GeneratorConfig from_text(const std::string& text);
  static GeneratorConfig load(const std::filesystem::path& path);
};

// Number of recursive iterations that shrink `size` to `shared` with a
// filter of extent `filter`: (size - shared) / (filter - 1), or 1 when
// size == shared (padded mode). Throws ConfigError listing the valid filter
// extents when the division is not exact.
std::size_t rfe_iteration_count(std::size_t size, std::size_t shared, std::size_t filter);

struct LayerPlan {
  LayerSpec spec;
  std::size_t filter_h = 0, filter_w = 0;
  std::size_t iterations = 0;
  std::size_t pad = 0;  // nonzero only in padded mode
};

// Resolves the shared resolution, filter sizes and iteration counts for each
// capture point.
std::vector<LayerPlan> plan_layers(std::span<const LayerSpec> specs, const GeneratorConfig& config);

struct NormLayer {
  ad::Var gamma, beta;
  Tensor running_mean, running_var;
};

struct RecursiveBlock {
  ad::Var weight;  // embedder: (c, c, fh, fw); decoder: transposed (c, c, fh, fw)
  ad::Var bias;
  std::vector<NormLayer> norms;  // one per iteration
};

struct ScorerLayer {
  ad::Var weight, bias;
};

// Intermediate and final outputs for a batch. Each vector has one entry per
// capture point, each entry batched (n, c, h, w).
struct GeneratorTrace {
  std::vector<ad::Var> patterns;    // (n, c_i, h', w')
  std::vector<ad::Var> pdn_scores;  // (n, c_i, h', w')
  std::vector<ad::Var> decoded;     // (n, c_i, h_i, w_i)
  std::vector<ad::Var> mask;        // relaxed (train) or exact {0, 1} (eval)
};

class Generator {
 public:
  Generator(GeneratorConfig config, std::span<const LayerSpec> specs);

  const GeneratorConfig& config() const { return config_; }
  const std::vector<LayerPlan>& plan() const { return plan_; }
  const std::vector<LayerSpec>& layer_specs() const { return specs_; }
  std::size_t pattern_width() const;

  // Stages, exposed individually for analysis and tests. Inputs are batched.
  // In training mode normalization uses batch statistics and, when
  // `update_stats` is set, folds them into the running estimates.
  std::vector<ad::Var> embed(std::span<const ad::Var> activations, Mode mode, bool update_stats = false);
  std::vector<ad::Var> score(std::span<const ad::Var> patterns) const;
  std::vector<ad::Var> decode(std::span<const ad::Var> scores, Mode mode, bool update_stats = false);
  std::vector<ad::Var> quantize(std::span<const ad::Var> decoded, Mode mode) const;

  GeneratorTrace forward(std::span<const ad::Var> activations, Mode mode, bool update_stats = false);

  // Learnable tensors in a stable order.
  std::vector<std::pair<std::string, ad::Var>> parameters() const;
  // Learnable tensors plus normalization running statistics.
  std::vector<std::pair<std::string, Tensor>> state() const;
  void load_state(const std::vector<std::pair<std::string, Tensor>>& state);
  void set_tensor(const std::string& name, const Tensor& value);

  std::vector<RecursiveBlock>& embedders() { return embedders_; }
  std::vector<RecursiveBlock>& decoders() { return decoders_; }
  std::vector<ScorerLayer>& scorer() { return scorer_; }

 private:
  ad::Var normalize(const ad::Var& x, NormLayer& norm, Mode mode, bool update_stats);
  std::vector<std::pair<std::string, Tensor*>> tensor_slots();

  GeneratorConfig config_;
  std::vector<LayerSpec> specs_;
  std::vector<LayerPlan> plan_;
  std::vector<RecursiveBlock> embedders_;
  std::vector<ScorerLayer> scorer_;
  std::vector<RecursiveBlock> decoders_;
};

// Per-layer real-valued scores for one sample.
struct ImportanceScores {
  std::vector<Tensor> patterns;    // (c_i, h', w')
  std::vector<Tensor> pdn_scores;  // (c_i, h', w')
  std::vector<Tensor> decoded;     // (c_i, h_i, w_i)
};

struct GeneratedPathway {
  PathwayMask mask;
  ImportanceScores scores;
  Tensor logits;  // unmasked model output
};

// Quantizes decoded scores: exact {0, 1} masks in evaluation mode, relaxed
// values in training mode.
PathwayMask daq_binarize(std::span<const Tensor> decoded, const QuantizerConfig& config, Mode mode);

// capture -> embed -> score -> decode -> quantize for one (c, h, w) input.
GeneratedPathway generate_pathway(const TargetModel& model, const Tensor& input, Generator& generator, Mode mode);
// Same for a (n, c, h, w) batch; evaluated in chunks of `chunk` samples.
std::vector<GeneratedPathway> generate_pathways(const TargetModel& model, const Tensor& inputs, Generator& generator,
                                                Mode mode, std::size_t chunk = 64);

void save_generator(const std::filesystem::path& path, const Generator& generator,
                    const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
Generator load_generator(const std::filesystem::path& path);

}  // namespace genpath
