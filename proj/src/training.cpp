// SPDX-License-Identifier: Apache-2.0
#include "genpath/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "genpath/errors.hpp"

namespace genpath {

void TrainConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("alpha must be positive");
  if (!(beta >= 0)) throw ConfigError("beta must be non-negative");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

double kd_loss(std::span<const double> masked_logits, std::span<const double> original_logits) {
  if (masked_logits.size() != original_logits.size() || masked_logits.empty()) {
    throw ShapeError("kd_loss needs two logit vectors of equal nonzero length");
  }
  const auto p = softmax(original_logits);
  const auto q = softmax(masked_logits);
  double loss = 0;
  for (std::size_t c = 0; c < p.size(); ++c) loss -= p[c] * std::log(std::max(q[c], 1e-12));
  return loss;
}

double sparsity_loss(const PathwayMask& mask) {
  double s = 0;
  for (const Tensor& t : mask.masks()) {
    for (double v : t.values()) s += v * v;
  }
  return s;
}

double total_loss(double kd, double sparsity, const TrainConfig& config) {
  return config.alpha * kd + config.beta * sparsity;
}

// ---- Adam ---------------------------------------------------------------------------

Adam::Adam(std::vector<ad::Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const Tensor& g = params_[i].grad();
    Tensor& w = params_[i].mutable_value();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---- objective ----------------------------------------------------------------------

BatchObjective batch_objective(const TargetModel& model, Generator& generator, const Tensor& batch, double alpha,
                               double beta, bool update_stats) {
  const Capture cap = capture_activations(model, batch);
  const std::size_t n = batch.dim(0);
  const std::size_t classes = model.num_classes();
  Tensor target({n, classes});
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = softmax(std::span<const double>(cap.logits.data() + i * classes, classes));
    std::copy(p.begin(), p.end(), target.data() + i * classes);
  }

  std::vector<ad::Var> acts;
  for (const auto& a : cap.activations.layers) acts.push_back(ad::constant(a));
  const GeneratorTrace trace = generator.forward(acts, Mode::kTrain, update_stats);
  const TracedForward masked = trace_forward(model, ad::constant(batch), trace.mask);

  BatchObjective out;
  ad::Var kd = ad::soft_cross_entropy(masked.logits, target);
  ad::Var sp;
  std::size_t below = 0, total = 0;
  for (const auto& m : trace.mask) {
    ad::Var s = ad::sum_squares(m);
    sp = sp ? ad::add(sp, s) : s;
    for (double v : m.value().values()) below += v < 0.5;
    total += m.value().size();
  }
  sp = ad::scale(sp, 1.0 / static_cast<double>(n));
  out.kd = kd.value()[0];
  out.sparsity = sp.value()[0];
  out.hard_sparsity = static_cast<double>(below) / static_cast<double>(total);
  out.total = ad::add(ad::scale(kd, alpha), ad::scale(sp, beta));
  return out;
}

// ---- loop ---------------------------------------------------------------------------

TrainState train(const TargetModel& model, Generator& generator, const Tensor& inputs, const TrainConfig& config,
                 const TrainCallback& on_epoch) {
  config.validate();
  if (inputs.rank() != 4 || inputs.dim(0) == 0) throw ShapeError("training inputs must be a nonempty (n, c, h, w) batch");
  if (generator.layer_specs() != model.layer_specs()) {
    throw ConfigError("generator capture points do not match model '" + model.architecture() + "'");
  }
  const std::uint32_t checksum = model.checksum();

  std::vector<ad::Var> params;
  for (const auto& [name, p] : generator.parameters()) params.push_back(p);
  Adam optimizer(params, config.learning_rate);

  const std::size_t n = inputs.dim(0);
  std::vector<std::size_t> order(n);
  std::mt19937_64 rng(config.seed);
  TrainState state;
  state.best_total = INFINITY;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LossRecord mean{epoch, 0, 0, 0, 0, 0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      std::vector<Tensor> samples;
      for (std::size_t i = 0; i < count; ++i) samples.push_back(inputs.slice(order[start + i]));
      const Tensor batch = Tensor::stack(samples);

      optimizer.zero_grad();
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches);
      BatchObjective obj;
      try {
        obj = batch_objective(model, generator, batch, config.alpha, config.beta, true);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite values at " + where + ": " + e.what());
      }
      const double total = obj.total.value()[0];
      if (!std::isfinite(total)) {
        throw NumericalError("non-finite loss at " + where + " (kd " + std::to_string(obj.kd) + ", sparsity " +
                             std::to_string(obj.sparsity) + ")");
      }
      ad::backward(obj.total);
      optimizer.step();
      ++state.step;

      const LossRecord rec{epoch, state.step, obj.kd, obj.sparsity, total, obj.hard_sparsity};
      state.history.push_back(rec);
      mean.kd += rec.kd;
      mean.sparsity += rec.sparsity;
      mean.total += rec.total;
      mean.hard_sparsity += rec.hard_sparsity;
      ++batches;
    }
    if (model.checksum() != checksum) throw NumericalError("target model parameters changed during training");

    const double inv = 1.0 / static_cast<double>(batches);
    mean.kd *= inv;
    mean.sparsity *= inv;
    mean.total *= inv;
    mean.hard_sparsity *= inv;
    mean.step = state.step;
    state.epoch = epoch;
    if (mean.total < state.best_total) {
      state.best_total = mean.total;
      state.best_epoch = epoch;
    }
    if (!config.out_dir.empty() && config.checkpoint_every && epoch % config.checkpoint_every == 0) {
      const auto path = config.out_dir / ("generator_epoch" + std::to_string(epoch) + ".gpck");
      save_generator(path, generator, {{"epoch", std::to_string(epoch)}});
      state.checkpoints.push_back(path);
    }
    if (on_epoch) on_epoch(mean);
  }

  if (!config.out_dir.empty()) {
    const auto path = config.out_dir / "generator.gpck";
    save_generator(path, generator, {{"epoch", std::to_string(state.epoch)}});
    state.checkpoints.push_back(path);
    write_loss_csv(config.out_dir / "loss.csv", state.history);
  }
  return state;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,step,kd,sparsity,total\n";
  for (const auto& r : history) {
    out << r.epoch << "," << r.step << "," << r.kd << "," << r.sparsity << "," << r.total << "\n";
  }
}

}  // namespace genpath
