// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fits the generator against a frozen target model. The objective is
//   alpha * KD(masked logits, original logits) + beta * ||P||^2
// with P the relaxed (train-mode) mask, so gradients reach every generator
// parameter through both terms.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "genpath/autodiff.hpp"
#include "genpath/generator.hpp"
#include "genpath/instrumentation.hpp"

namespace genpath {

struct TrainConfig {
  double alpha = 1.0;
  double beta = 0.005;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Write a generator checkpoint every this many epochs (0 disables); the
  // final generator is always written when `out_dir` is set.
  std::size_t checkpoint_every = 1;
  std::filesystem::path out_dir;

  // alpha > 0, beta >= 0, lr > 0, batch_size > 0.
  void validate() const;
};

// Soft-target cross-entropy -sum_c p_orig(c) log max(p_masked(c), 1e-12).
double kd_loss(std::span<const double> masked_logits, std::span<const double> original_logits);
// Squared l2 norm over all layers.
double sparsity_loss(const PathwayMask& mask);
double total_loss(double kd, double sparsity, const TrainConfig& config);

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global optimizer step, 1-based
  double kd = 0;
  double sparsity = 0;  // batch mean of ||P||^2
  double total = 0;
  double hard_sparsity = 0;  // fraction of relaxed mask entries below 0.5
};

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::vector<LossRecord> history;  // one record per step
  double best_total = 0;            // lowest epoch-mean total loss
  std::size_t best_epoch = 0;
  std::vector<std::filesystem::path> checkpoints;
};

// Adam on a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct BatchObjective {
  ad::Var total;  // shape (1)
  double kd = 0;
  double sparsity = 0;
  double hard_sparsity = 0;
};

// Builds the differentiable objective for one (n, c, h, w) batch.
BatchObjective batch_objective(const TargetModel& model, Generator& generator, const Tensor& batch, double alpha,
                               double beta, bool update_stats);

using TrainCallback = std::function<void(const LossRecord& epoch_mean)>;

// Minibatch training over `inputs` (n, c, h, w). Throws NumericalError on a
// non-finite loss (naming the batch) or if the target model's parameters
// change.
TrainState train(const TargetModel& model, Generator& generator, const Tensor& inputs, const TrainConfig& config,
                 const TrainCallback& on_epoch = {});

// Comma-separated loss curve: epoch,step,kd,sparsity,total.
void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history);

}  // namespace genpath
