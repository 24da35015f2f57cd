// SPDX-License-Identifier: Apache-2.0
#include "genpath/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "genpath/errors.hpp"

namespace genpath {

namespace {

void check_sparsity(double s) {
  if (!(s >= 0.0 && s < 1.0)) throw ConfigError("firing sparsity must be in [0, 1), got " + std::to_string(s));
}

// Indices of `values` ordered by descending value, ties by ascending index.
std::vector<std::size_t> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return idx;
}

std::vector<LayerSpec> specs_of(const ScoreField& scores) {
  std::vector<LayerSpec> specs;
  for (const auto& t : scores.layers) {
    if (t.rank() != 3) throw ShapeError("score layers must be (c, h, w), got " + to_string(t.shape()));
    specs.push_back({t.dim(0), t.dim(1), t.dim(2)});
  }
  return specs;
}

void check_finite(const ScoreField& scores) {
  for (std::size_t i = 0; i < scores.layers.size(); ++i) {
    if (!scores.layers[i].all_finite()) {
      throw NumericalError(scores.method + " scores at layer " + std::to_string(i) + " are not finite");
    }
  }
}

}  // namespace

ScoreField taylor_importance(const TargetModel& model, const Tensor& input, std::size_t class_index) {
  const MaskedGradients g = masked_gradients(model, input, PathwayMask::ones(model.layer_specs()), class_index);
  ScoreField out{"taylor", {}};
  for (std::size_t i = 0; i < g.activations.size(); ++i) {
    Tensor s = g.activations[i];
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = std::abs(s[j] * g.layer_grads[i][j]);
    out.layers.push_back(std::move(s));
  }
  return out;
}

ScoreField intgrad_importance(const TargetModel& model, const Tensor& input, std::size_t class_index,
                              std::size_t steps, const Tensor& baseline) {
  if (steps < 2) throw ConfigError("integrated gradients needs at least 2 steps");
  if (class_index >= model.num_classes()) throw ConfigError("class index out of range");
  const Tensor base = baseline.empty() ? Tensor::zeros(model.input_shape()) : baseline;
  const ActivationSet a = capture_activations(model, input).activations;
  const ActivationSet a0 = capture_activations(model, base).activations;

  ScoreField out{"intgrad", {}};
  const std::size_t classes = model.num_classes();
  for (std::size_t layer = 0; layer < model.num_layers(); ++layer) {
    const Tensor& x = a.layers[layer];
    const Tensor& x0 = a0.layers[layer];
    std::vector<Tensor> path;
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
      Tensor p(x.shape());
      for (std::size_t j = 0; j < p.size(); ++j) p[j] = x0[j] + t * (x[j] - x0[j]);
      path.push_back(std::move(p));
    }
    ad::Var points = ad::parameter(Tensor::stack(path));
    ad::Var logits = forward_from_layer(model, layer, points);
    Tensor seed = Tensor::zeros(logits.shape());
    for (std::size_t k = 0; k < steps; ++k) seed[k * classes + class_index] = 1.0;
    ad::backward(logits, seed);

    // trapezoid weights: 1/2 at the ends, 1 inside, over (steps - 1) intervals
    Tensor s(x.shape());
    const std::size_t m = x.size();
    const double h = 1.0 / static_cast<double>(steps - 1);
    if (points.has_grad()) {
      const Tensor& g = points.grad();
      for (std::size_t k = 0; k < steps; ++k) {
        const double w = (k == 0 || k + 1 == steps ? 0.5 : 1.0) * h;
        for (std::size_t j = 0; j < m; ++j) s[j] += w * g[k * m + j];
      }
    }
    for (std::size_t j = 0; j < m; ++j) s[j] *= x[j] - x0[j];
    out.layers.push_back(std::move(s));
  }
  return out;
}

ScoreField magnitude_importance(const ActivationSet& acts) {
  if (acts.batched()) throw ShapeError("magnitude_importance takes one sample's activations");
  return ScoreField{"magnitude", acts.layers};
}

std::size_t kept_count(std::size_t n, double sparsity) {
  check_sparsity(sparsity);
  const double want = (1.0 - sparsity) * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::ceil(want - 1e-9));
  return std::min(n, std::max<std::size_t>(k, n ? 1 : 0));
}

PathwayMask threshold_to_mask(const ScoreField& scores, double sparsity, Scope scope) {
  check_sparsity(sparsity);
  check_finite(scores);
  const auto specs = specs_of(scores);
  if (scope == Scope::kPerLayer) {
    std::vector<Tensor> masks;
    for (const Tensor& t : scores.layers) {
      Tensor m(t.shape());
      const auto order = rank_descending(t.values());
      const std::size_t keep = kept_count(t.size(), sparsity);
      for (std::size_t r = 0; r < keep; ++r) m[order[r]] = 1.0;
      masks.push_back(std::move(m));
    }
    return PathwayMask(std::move(masks));
  }
  std::vector<double> flat;
  for (const Tensor& t : scores.layers) flat.insert(flat.end(), t.values().begin(), t.values().end());
  std::vector<double> keep(flat.size(), 0.0);
  const auto order = rank_descending(flat);
  const std::size_t k = kept_count(flat.size(), sparsity);
  for (std::size_t r = 0; r < k; ++r) keep[order[r]] = 1.0;
  return PathwayMask::unflatten(keep, specs);
}

PathwayMask random_mask(std::span<const LayerSpec> specs, double sparsity, std::uint64_t seed) {
  check_sparsity(sparsity);
  std::mt19937_64 rng(seed);
  std::vector<Tensor> masks;
  for (const LayerSpec& s : specs) {
    Tensor m(s.shape());
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t keep = kept_count(m.size(), sparsity);
    // partial Fisher-Yates: the first `keep` slots become a uniform sample
    for (std::size_t r = 0; r < keep; ++r) {
      std::uniform_int_distribution<std::size_t> pick(r, idx.size() - 1);
      std::swap(idx[r], idx[pick(rng)]);
      m[idx[r]] = 1.0;
    }
    masks.push_back(std::move(m));
  }
  return PathwayMask(std::move(masks));
}

GreedyResult greedy_prune(const TargetModel& model, const Tensor& input, const ScoreField& scores,
                          std::optional<std::size_t> label, std::size_t chunk) {
  check_finite(scores);
  const auto specs = specs_of(scores);
  if (specs != model.layer_specs()) throw ShapeError("greedy_prune: scores do not match the model's capture points");
  const std::size_t original = argmax(capture_activations(model, input).logits.values());
  GreedyResult out;
  out.mask = PathwayMask::ones(model.layer_specs());
  if (label && *label != original) {
    out.misclassified = true;
    return out;
  }

  std::vector<double> flat;
  for (const Tensor& t : scores.layers) flat.insert(flat.end(), t.values().begin(), t.values().end());
  const std::size_t n = flat.size();
  if (chunk == 0) chunk = std::max<std::size_t>(1, n / 100);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return flat[a] < flat[b]; });

  std::vector<double> keep(n, 1.0);
  for (std::size_t removed = 0; removed < n;) {
    std::vector<double> trial = keep;
    const std::size_t end = std::min(n, removed + chunk);
    for (std::size_t r = removed; r < end; ++r) trial[order[r]] = 0.0;
    const PathwayMask candidate = PathwayMask::unflatten(trial, specs);
    if (argmax(masked_forward(model, input, candidate).values()) != original) break;
    keep = std::move(trial);
    removed = end;
  }
  out.mask = PathwayMask::unflatten(keep, specs);
  out.sparsity = out.mask.firing_sparsity();
  return out;
}

ScoreField importance_by_name(const std::string& method, const TargetModel& model, const Tensor& input,
                              std::size_t class_index) {
  if (method == "taylor") return taylor_importance(model, input, class_index);
  if (method == "intgrad") return intgrad_importance(model, input, class_index);
  if (method == "magnitude") return magnitude_importance(capture_activations(model, input).activations);
  throw ConfigError("unknown importance method '" + method + "' (expected taylor, intgrad or magnitude)");
}

}  // namespace genpath
