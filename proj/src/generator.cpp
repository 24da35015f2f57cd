// SPDX-License-Identifier: Apache-2.0
#include "genpath/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "genpath/checkpoint.hpp"
#include "genpath/errors.hpp"
#include "genpath/io/config.hpp"

namespace genpath {

// ---- configuration -------------------------------------------------------------

std::string GeneratorConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "shared_height = " << shared_height << "\n";
  out << "shared_width = " << shared_width << "\n";
  out << "filter_sizes = ";
  if (filter_sizes.empty()) {
    out << "auto";
  } else {
    for (std::size_t i = 0; i < filter_sizes.size(); ++i) {
      out << (i ? "," : "") << filter_sizes[i].first << "x" << filter_sizes[i].second;
    }
  }
  out << "\n";
  out << "pdn_depth = " << pdn_depth << "\n";
  out << "pdn_hidden = " << pdn_hidden << "\n";
  out << "quant_bits = " << quantizer.bits << "\n";
  out << "quant_lower = " << quantizer.lower << "\n";
  out << "quant_upper = " << quantizer.upper << "\n";
  out << "temperature = " << quantizer.temperature << "\n";
  out << "normalization = " << (normalization ? "true" : "false") << "\n";
  out << "norm_eps = " << norm_eps << "\n";
  out << "norm_momentum = " << norm_momentum << "\n";
  out << "decoder_gain = " << decoder_gain << "\n";
  out << "decoder_shift = " << decoder_shift << "\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

GeneratorConfig GeneratorConfig::from_text(const std::string& text) {
  const io::KeyValues kv = io::parse_key_values(text);
  GeneratorConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "shared_height") {
      c.shared_height = io::to_size(key, value);
    } else if (key == "shared_width") {
      c.shared_width = io::to_size(key, value);
    } else if (key == "filter_sizes") {
      c.filter_sizes.clear();
      if (value != "auto" && !value.empty()) {
        std::istringstream in(value);
        std::string item;
        while (std::getline(in, item, ',')) {
          const auto x = item.find('x');
          if (x == std::string::npos) throw ConfigError("filter_sizes entry '" + item + "' is not HxW");
          c.filter_sizes.emplace_back(io::to_size(key, item.substr(0, x)), io::to_size(key, item.substr(x + 1)));
        }
      }
    } else if (key == "pdn_depth") {
      c.pdn_depth = io::to_size(key, value);
    } else if (key == "pdn_hidden") {
      c.pdn_hidden = io::to_size(key, value);
    } else if (key == "quant_bits") {
      c.quantizer.bits = static_cast<int>(io::to_size(key, value));
    } else if (key == "quant_lower") {
      c.quantizer.lower = io::to_double(key, value);
    } else if (key == "quant_upper") {
      c.quantizer.upper = io::to_double(key, value);
    } else if (key == "temperature") {
      c.quantizer.temperature = io::to_double(key, value);
    } else if (key == "normalization") {
      c.normalization = io::to_bool(key, value);
    } else if (key == "norm_eps") {
      c.norm_eps = io::to_double(key, value);
    } else if (key == "norm_momentum") {
      c.norm_momentum = io::to_double(key, value);
    } else if (key == "decoder_gain") {
      c.decoder_gain = io::to_double(key, value);
    } else if (key == "decoder_shift") {
      c.decoder_shift = io::to_double(key, value);
    } else if (key == "seed") {
      c.seed = io::to_u64(key, value);
    } else {
      throw ConfigError("unknown generator config key '" + key + "'");
    }
  }
  c.quantizer.validate();
  return c;
}

GeneratorConfig GeneratorConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read generator config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

// ---- planning ---------------------------------------------------------------------

std::size_t rfe_iteration_count(std::size_t size, std::size_t shared, std::size_t filter) {
  if (shared == 0 || shared > size) {
    throw ConfigError("shared resolution " + std::to_string(shared) + " must be in [1, " + std::to_string(size) + "]");
  }
  if (size == shared) return 1;
  const std::size_t span = size - shared;
  if (filter >= 2 && span % (filter - 1) == 0) return span / (filter - 1);
  std::string valid;
  for (std::size_t g = 2; g <= span + 1; ++g) {
    if (span % (g - 1) == 0) valid += (valid.empty() ? "" : ", ") + std::to_string(g);
  }
  throw ConfigError("filter size " + std::to_string(filter) + " cannot reduce " + std::to_string(size) + " to " +
                    std::to_string(shared) + "; valid filter sizes: " + valid);
}

std::vector<LayerPlan> plan_layers(std::span<const LayerSpec> specs, const GeneratorConfig& config) {
  if (specs.empty()) throw ConfigError("generator needs at least one capture point");
  std::size_t sh = config.shared_height, sw = config.shared_width;
  if (sh == 0 || sw == 0) {
    auto smallest = std::min_element(specs.begin(), specs.end(), [](const LayerSpec& a, const LayerSpec& b) {
      return a.height * a.width < b.height * b.width;
    });
    if (sh == 0) sh = smallest->height;
    if (sw == 0) sw = smallest->width;
  }
  if (!config.filter_sizes.empty() && config.filter_sizes.size() != specs.size()) {
    throw ConfigError("filter_sizes lists " + std::to_string(config.filter_sizes.size()) + " layers, model has " +
                      std::to_string(specs.size()));
  }

  std::vector<LayerPlan> plan;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    LayerPlan p{s, 0, 0, 0, 0};
    const bool padded_h = s.height == sh, padded_w = s.width == sw;
    if (padded_h != padded_w) {
      throw ConfigError("layer " + std::to_string(i) + " " + to_string(s.shape()) +
                        " matches the shared resolution in only one dimension");
    }
    if (padded_h) {
      p.filter_h = config.filter_sizes.empty() ? 3 : config.filter_sizes[i].first;
      p.filter_w = config.filter_sizes.empty() ? 3 : config.filter_sizes[i].second;
      if (p.filter_h % 2 == 0 || p.filter_w % 2 == 0 || p.filter_h != p.filter_w) {
        throw ConfigError("layer " + std::to_string(i) + " is at the shared resolution and needs an odd square filter");
      }
      p.iterations = 1;
      p.pad = (p.filter_h - 1) / 2;
    } else if (!config.filter_sizes.empty()) {
      p.filter_h = config.filter_sizes[i].first;
      p.filter_w = config.filter_sizes[i].second;
      p.iterations = rfe_iteration_count(s.height, sh, p.filter_h);
      if (rfe_iteration_count(s.width, sw, p.filter_w) != p.iterations) {
        throw ConfigError("layer " + std::to_string(i) + ": filter " + std::to_string(p.filter_h) + "x" +
                          std::to_string(p.filter_w) + " gives different iteration counts per axis");
      }
    } else {
      if (sh > s.height || sw > s.width) {
        throw ConfigError("shared resolution exceeds layer " + std::to_string(i) + " " + to_string(s.shape()));
      }
      // smallest height filter >= 2 for which a width filter with the same
      // iteration count exists
      const std::size_t span_h = s.height - sh, span_w = s.width - sw;
      for (std::size_t g = 2; g <= span_h + 1; ++g) {
        if (span_h % (g - 1) != 0) continue;
        const std::size_t iters = span_h / (g - 1);
        if (span_w % iters != 0 || span_w / iters == 0) continue;
        p.filter_h = g;
        p.filter_w = span_w / iters + 1;
        p.iterations = iters;
        break;
      }
      if (p.iterations == 0) {
        throw ConfigError("no filter size reduces layer " + std::to_string(i) + " " + to_string(s.shape()) + " to " +
                          std::to_string(sh) + "x" + std::to_string(sw));
      }
    }
    plan.push_back(p);
  }
  return plan;
}

// ---- generator --------------------------------------------------------------------

namespace {

Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

NormLayer make_norm(std::size_t channels, double gamma, double beta) {
  return NormLayer{ad::parameter(Tensor({channels}, gamma)), ad::parameter(Tensor({channels}, beta)),
                   Tensor::zeros({channels}), Tensor::ones({channels})};
}

ad::Var to_rows(const ad::Var& x) {
  const std::size_t n = x.shape()[0];
  return ad::reshape(x, {n, x.value().size() / n});
}

}  // namespace

Generator::Generator(GeneratorConfig config, std::span<const LayerSpec> specs)
    : config_(std::move(config)), specs_(specs.begin(), specs.end()) {
  config_.quantizer.validate();
  if (config_.pdn_depth == 0) throw ConfigError("pdn_depth must be at least 1");
  plan_ = plan_layers(specs_, config_);
  std::mt19937_64 rng(config_.seed);

  for (const LayerPlan& p : plan_) {
    const std::size_t c = p.spec.channels;
    const double fan = static_cast<double>(c * p.filter_h * p.filter_w);
    RecursiveBlock block{ad::parameter(random_normal({c, c, p.filter_h, p.filter_w}, std::sqrt(2.0 / fan), rng)),
                         ad::parameter(Tensor::zeros({c})), {}};
    for (std::size_t t = 0; t < p.iterations; ++t) block.norms.push_back(make_norm(c, 1.0, 0.0));
    embedders_.push_back(std::move(block));
  }

  const std::size_t width = pattern_width();
  const std::size_t hidden = config_.pdn_hidden ? config_.pdn_hidden : width;
  for (std::size_t j = 0; j < config_.pdn_depth; ++j) {
    const std::size_t in = j == 0 ? width : hidden;
    const std::size_t out = j + 1 == config_.pdn_depth ? width : hidden;
    const bool last = j + 1 == config_.pdn_depth;
    const double stddev = last ? std::sqrt(1.0 / static_cast<double>(in)) : std::sqrt(2.0 / static_cast<double>(in));
    scorer_.push_back(ScorerLayer{ad::parameter(random_normal({out, in}, stddev, rng)), ad::parameter(Tensor::zeros({out}))});
  }

  for (const LayerPlan& p : plan_) {
    const std::size_t c = p.spec.channels;
    const double fan = static_cast<double>(c * p.filter_h * p.filter_w);
    RecursiveBlock block{ad::parameter(random_normal({c, c, p.filter_h, p.filter_w}, std::sqrt(2.0 / fan), rng)),
                         ad::parameter(Tensor::zeros({c})), {}};
    for (std::size_t t = 0; t < p.iterations; ++t) {
      const bool last = t + 1 == p.iterations;
      block.norms.push_back(last ? make_norm(c, config_.decoder_gain, config_.decoder_shift) : make_norm(c, 1.0, 0.0));
    }
    decoders_.push_back(std::move(block));
  }
}

std::size_t Generator::pattern_width() const {
  std::size_t w = 0;
  for (const LayerPlan& p : plan_) {
    const std::size_t shrink_h = p.pad ? 0 : p.iterations * (p.filter_h - 1);
    const std::size_t shrink_w = p.pad ? 0 : p.iterations * (p.filter_w - 1);
    w += p.spec.channels * (p.spec.height - shrink_h) * (p.spec.width - shrink_w);
  }
  return w;
}

ad::Var Generator::normalize(const ad::Var& x, NormLayer& norm, Mode mode, bool update_stats) {
  if (!config_.normalization) return x;
  if (mode == Mode::kTrain) {
    ad::BatchStats stats;
    ad::Var y = ad::batch_norm(x, norm.gamma, norm.beta, config_.norm_eps, &stats);
    if (update_stats) {
      const Shape& s = x.shape();
      const double count = static_cast<double>(s[0] * s[2] * s[3]);
      const double unbias = count > 1 ? count / (count - 1) : 1.0;
      const double m = config_.norm_momentum;
      for (std::size_t c = 0; c < stats.mean.size(); ++c) {
        norm.running_mean[c] = (1 - m) * norm.running_mean[c] + m * stats.mean[c];
        norm.running_var[c] = (1 - m) * norm.running_var[c] + m * stats.var[c] * unbias;
      }
    }
    return y;
  }
  const std::size_t c = norm.running_mean.size();
  Tensor scale({c}), shift({c});
  for (std::size_t i = 0; i < c; ++i) {
    const double inv = 1.0 / std::sqrt(norm.running_var[i] + config_.norm_eps);
    scale[i] = norm.gamma.value()[i] * inv;
    shift[i] = norm.beta.value()[i] - norm.running_mean[i] * scale[i];
  }
  return ad::channel_affine(x, ad::constant(std::move(scale)), ad::constant(std::move(shift)));
}

std::vector<ad::Var> Generator::embed(std::span<const ad::Var> activations, Mode mode, bool update_stats) {
  if (activations.size() != plan_.size()) {
    throw ShapeError("generator expects " + std::to_string(plan_.size()) + " activation layers, got " +
                     std::to_string(activations.size()));
  }
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < plan_.size(); ++i) {
    const LayerPlan& p = plan_[i];
    const Shape& s = activations[i].shape();
    if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != p.spec.shape()) {
      throw ShapeError("generator layer " + std::to_string(i) + " expects " + to_string(p.spec.shape()) + ", got " +
                       to_string(s));
    }
    RecursiveBlock& block = embedders_[i];
    ad::Var x = activations[i];
    for (std::size_t t = 0; t < p.iterations; ++t) {
      const std::size_t h_before = x.shape()[2];
      x = ad::conv2d(x, block.weight, block.bias, {1, p.pad});
      const std::size_t expect = p.pad ? h_before : h_before - (p.filter_h - 1);
      if (x.shape()[2] != expect) throw std::logic_error("embedder shape drift at layer " + std::to_string(i));
      x = ad::relu(normalize(x, block.norms[t], mode, update_stats));
    }
    out.push_back(x);
  }
  const Shape& first = out[0].shape();
  for (const auto& x : out) {
    if (x.shape()[2] != first[2] || x.shape()[3] != first[3]) {
      throw std::logic_error("embedders disagree on the shared resolution");
    }
  }
  return out;
}

std::vector<ad::Var> Generator::score(std::span<const ad::Var> patterns) const {
  if (patterns.size() != plan_.size()) throw ShapeError("scorer expects one pattern tensor per layer");
  std::vector<ad::Var> rows;
  std::size_t width = 0;
  for (const auto& p : patterns) {
    rows.push_back(to_rows(p));
    width += rows.back().shape()[1];
  }
  if (width != pattern_width()) {
    throw ShapeError("scorer expects " + std::to_string(pattern_width()) + " pattern features, got " +
                     std::to_string(width));
  }
  ad::Var x = ad::concat_features(rows);
  for (std::size_t j = 0; j < scorer_.size(); ++j) {
    x = ad::linear(x, scorer_[j].weight, scorer_[j].bias);
    if (j + 1 < scorer_.size()) x = ad::relu(x);
  }
  std::vector<ad::Var> out;
  std::size_t off = 0;
  for (const auto& p : patterns) {
    const std::size_t f = p.value().size() / p.shape()[0];
    out.push_back(ad::reshape(ad::slice_features(x, off, f), p.shape()));
    off += f;
  }
  return out;
}

std::vector<ad::Var> Generator::decode(std::span<const ad::Var> scores, Mode mode, bool update_stats) {
  if (scores.size() != plan_.size()) throw ShapeError("decoder expects one score tensor per layer");
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < plan_.size(); ++i) {
    const LayerPlan& p = plan_[i];
    RecursiveBlock& block = decoders_[i];
    ad::Var x = scores[i];
    for (std::size_t t = 0; t < p.iterations; ++t) {
      x = ad::conv_transpose2d(x, block.weight, block.bias, {1, p.pad});
      x = normalize(x, block.norms[t], mode, update_stats);
      if (t + 1 < p.iterations) x = ad::relu(x);
    }
    const Shape& s = x.shape();
    if (Shape(s.begin() + 1, s.end()) != p.spec.shape()) {
      throw std::logic_error("decoder produced " + to_string(s) + " for layer " + std::to_string(i) + " of shape " +
                             to_string(p.spec.shape()));
    }
    out.push_back(x);
  }
  return out;
}

std::vector<ad::Var> Generator::quantize(std::span<const ad::Var> decoded, Mode mode) const {
  std::vector<ad::Var> out;
  for (const auto& d : decoded) {
    if (mode == Mode::kTrain) {
      out.push_back(ad::soft_quantize(d, config_.quantizer));
    } else {
      Tensor m(d.shape());
      for (std::size_t j = 0; j < m.size(); ++j) m[j] = hard_quantize_value(d.value()[j], config_.quantizer);
      out.push_back(ad::constant(std::move(m)));
    }
  }
  return out;
}

GeneratorTrace Generator::forward(std::span<const ad::Var> activations, Mode mode, bool update_stats) {
  GeneratorTrace t;
  t.patterns = embed(activations, mode, update_stats);
  t.pdn_scores = score(t.patterns);
  t.decoded = decode(t.pdn_scores, mode, update_stats);
  t.mask = quantize(t.decoded, mode);
  return t;
}

std::vector<std::pair<std::string, Tensor*>> Generator::tensor_slots() {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto block_slots = [&](const std::string& prefix, RecursiveBlock& b) {
    out.emplace_back(prefix + ".weight", &b.weight.mutable_value());
    out.emplace_back(prefix + ".bias", &b.bias.mutable_value());
    for (std::size_t t = 0; t < b.norms.size(); ++t) {
      const std::string n = prefix + ".norm" + std::to_string(t);
      out.emplace_back(n + ".gamma", &b.norms[t].gamma.mutable_value());
      out.emplace_back(n + ".beta", &b.norms[t].beta.mutable_value());
      out.emplace_back(n + ".running_mean", &b.norms[t].running_mean);
      out.emplace_back(n + ".running_var", &b.norms[t].running_var);
    }
  };
  for (std::size_t i = 0; i < embedders_.size(); ++i) block_slots("rfe" + std::to_string(i), embedders_[i]);
  for (std::size_t j = 0; j < scorer_.size(); ++j) {
    out.emplace_back("pdn" + std::to_string(j) + ".weight", &scorer_[j].weight.mutable_value());
    out.emplace_back("pdn" + std::to_string(j) + ".bias", &scorer_[j].bias.mutable_value());
  }
  for (std::size_t i = 0; i < decoders_.size(); ++i) block_slots("rpd" + std::to_string(i), decoders_[i]);
  return out;
}

std::vector<std::pair<std::string, ad::Var>> Generator::parameters() const {
  std::vector<std::pair<std::string, ad::Var>> out;
  auto block = [&](const std::string& prefix, const RecursiveBlock& b) {
    out.emplace_back(prefix + ".weight", b.weight);
    out.emplace_back(prefix + ".bias", b.bias);
    if (!config_.normalization) return;
    for (std::size_t t = 0; t < b.norms.size(); ++t) {
      const std::string n = prefix + ".norm" + std::to_string(t);
      out.emplace_back(n + ".gamma", b.norms[t].gamma);
      out.emplace_back(n + ".beta", b.norms[t].beta);
    }
  };
  for (std::size_t i = 0; i < embedders_.size(); ++i) block("rfe" + std::to_string(i), embedders_[i]);
  for (std::size_t j = 0; j < scorer_.size(); ++j) {
    out.emplace_back("pdn" + std::to_string(j) + ".weight", scorer_[j].weight);
    out.emplace_back("pdn" + std::to_string(j) + ".bias", scorer_[j].bias);
  }
  for (std::size_t i = 0; i < decoders_.size(); ++i) block("rpd" + std::to_string(i), decoders_[i]);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Generator::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& [name, slot] : const_cast<Generator*>(this)->tensor_slots()) out.emplace_back(name, *slot);
  return out;
}

void Generator::set_tensor(const std::string& name, const Tensor& value) {
  for (auto& [n, slot] : tensor_slots()) {
    if (n == name) {
      if (slot->shape() != value.shape()) {
        throw ShapeError("generator tensor " + name + " expects " + to_string(slot->shape()) + ", got " +
                         to_string(value.shape()));
      }
      *slot = value;
      return;
    }
  }
  throw ConfigError("unknown generator tensor " + name);
}

void Generator::load_state(const std::vector<std::pair<std::string, Tensor>>& state) {
  const auto slots = tensor_slots();
  if (state.size() != slots.size()) {
    throw DataError("generator state has " + std::to_string(state.size()) + " tensors, expected " +
                    std::to_string(slots.size()));
  }
  for (const auto& [name, t] : state) set_tensor(name, t);
}

// ---- pathway generation -------------------------------------------------------------

PathwayMask daq_binarize(std::span<const Tensor> decoded, const QuantizerConfig& config, Mode mode) {
  config.validate();
  std::vector<Tensor> masks;
  for (const Tensor& d : decoded) {
    if (!d.all_finite()) throw NumericalError("decoded scores contain non-finite values");
    Tensor m(d.shape());
    for (std::size_t j = 0; j < m.size(); ++j) {
      m[j] = mode == Mode::kEval ? hard_quantize_value(d[j], config) : soft_quantize_value(d[j], config).value;
    }
    masks.push_back(std::move(m));
  }
  return PathwayMask(std::move(masks));
}

std::vector<GeneratedPathway> generate_pathways(const TargetModel& model, const Tensor& inputs, Generator& generator,
                                                Mode mode, std::size_t chunk) {
  if (generator.layer_specs() != model.layer_specs()) {
    throw ConfigError("generator was built for different capture points than model '" + model.architecture() + "'");
  }
  const Tensor batch = as_batch(model, inputs);
  const std::size_t n = batch.dim(0);
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<GeneratedPathway> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    std::vector<Tensor> samples;
    for (std::size_t i = 0; i < count; ++i) samples.push_back(batch.slice(start + i));
    const Capture cap = capture_activations(model, Tensor::stack(samples));
    std::vector<ad::Var> acts;
    for (const auto& a : cap.activations.layers) acts.push_back(ad::constant(a));
    const GeneratorTrace t = generator.forward(acts, mode, false);
    for (std::size_t i = 0; i < count; ++i) {
      GeneratedPathway g;
      std::vector<Tensor> masks;
      for (std::size_t l = 0; l < t.mask.size(); ++l) {
        masks.push_back(t.mask[l].value().slice(i));
        g.scores.patterns.push_back(t.patterns[l].value().slice(i));
        g.scores.pdn_scores.push_back(t.pdn_scores[l].value().slice(i));
        g.scores.decoded.push_back(t.decoded[l].value().slice(i));
      }
      g.mask = PathwayMask(std::move(masks));
      g.logits = cap.logits.slice(i);
      out.push_back(std::move(g));
    }
  }
  return out;
}

GeneratedPathway generate_pathway(const TargetModel& model, const Tensor& input, Generator& generator, Mode mode) {
  if (input.rank() != 3) throw ShapeError("generate_pathway takes a single (c, h, w) input");
  auto out = generate_pathways(model, input, generator, mode, 1);
  return std::move(out.front());
}

void save_generator(const std::filesystem::path& path, const Generator& generator,
                    const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  Checkpoint ck;
  ck.kind = "generator";
  std::string specs;
  for (const auto& s : generator.layer_specs()) {
    specs += (specs.empty() ? "" : ";") + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
             std::to_string(s.width);
  }
  ck.meta["layer_specs"] = specs;
  // one metadata entry per config key, prefixed "config."
  for (const auto& [k, v] : io::parse_key_values(generator.config().to_text())) ck.meta["config." + k] = v;
  for (const auto& [k, v] : extra_meta) ck.meta[k] = v;
  ck.tensors = generator.state();
  write_checkpoint(path, ck);
}

Generator load_generator(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.kind != "generator") throw ConfigError(path.string() + " is a '" + ck.kind + "' checkpoint, not a generator");
  std::string text;
  for (const auto& [k, v] : ck.meta) {
    if (k.rfind("config.", 0) == 0) text += k.substr(7) + " = " + v + "\n";
  }
  const GeneratorConfig config = GeneratorConfig::from_text(text);
  std::vector<LayerSpec> specs;
  const auto it = ck.meta.find("layer_specs");
  if (it == ck.meta.end()) throw DataError(path.string() + ": generator checkpoint lacks layer_specs");
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ';')) {
    LayerSpec s;
    char comma = 0;
    std::istringstream one(item);
    if (!(one >> s.channels >> comma >> s.height >> comma >> s.width)) {
      throw DataError(path.string() + ": malformed layer_specs entry '" + item + "'");
    }
    specs.push_back(s);
  }
  Generator g(config, specs);
  g.load_state(ck.tensors);
  return g;
}

}  // namespace genpath
