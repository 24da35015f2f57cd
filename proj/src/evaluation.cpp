// SPDX-License-Identifier: Apache-2.0
#include "genpath/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "genpath/errors.hpp"
#include "genpath/io/image.hpp"

namespace genpath {

namespace {

double percent(double sum, std::size_t n) { return n ? 100.0 * sum / static_cast<double>(n) : 0.0; }

bool same_class(const PredictionRecord& r) { return r.masked_class == r.original_class; }

std::vector<std::vector<std::size_t>> group_by_class(std::span<const int> classes, std::vector<int>& ids) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < classes.size(); ++i) groups[classes[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [c, members] : groups) {
    ids.push_back(c);
    out.push_back(std::move(members));
  }
  return out;
}

std::vector<std::size_t> reference_classes(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = labels.empty() ? argmax(std::span<const double>(logits.data() + i * classes, classes))
                            : static_cast<std::size_t>(labels[i]);
  }
  return out;
}

double agreement(const Tensor& logits, const std::vector<std::size_t>& reference) {
  const std::size_t classes = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    hits += argmax(std::span<const double>(logits.data() + i * classes, classes)) == reference[i];
  }
  return percent(static_cast<double>(hits), reference.size());
}

// Batched logits of `inputs` with one mask per sample, in chunks to bound
// memory.
Tensor masked_logits(const TargetModel& model, const Tensor& inputs, std::span<const PathwayMask> masks) {
  const Tensor batch = as_batch(model, inputs);
  const std::size_t n = batch.dim(0), classes = model.num_classes();
  Tensor out({n, classes});
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t count = std::min(kChunk, n - start);
    std::vector<Tensor> samples;
    for (std::size_t i = 0; i < count; ++i) samples.push_back(batch.slice(start + i));
    const Tensor l = masked_forward(model, Tensor::stack(samples), masks.subspan(start, count));
    std::copy(l.values().begin(), l.values().end(), out.data() + start * classes);
  }
  return out;
}

}  // namespace

PredictionRecord make_record(std::span<const double> original_logits, std::span<const double> masked_logits,
                             std::optional<std::size_t> label) {
  if (original_logits.size() != masked_logits.size() || original_logits.empty()) {
    throw ShapeError("prediction record needs two logit vectors of equal nonzero length");
  }
  PredictionRecord r;
  r.original_probs = softmax(original_logits);
  r.masked_probs = softmax(masked_logits);
  r.original_class = argmax(original_logits);
  r.masked_class = argmax(masked_logits);
  r.label = label;
  return r;
}

double accuracy(std::span<const PredictionRecord> records, Reference reference) {
  double hits = 0;
  for (const auto& r : records) {
    if (reference == Reference::kLabel) {
      if (!r.label) throw ConfigError("label-referenced accuracy needs labels on every record");
      hits += r.masked_class == *r.label;
    } else {
      hits += same_class(r);
    }
  }
  return percent(hits, records.size());
}

double mic(std::span<const PredictionRecord> records) {
  double sum = 0;
  for (const auto& r : records) {
    const double y = r.confidence(), yh = r.masked_confidence();
    if (yh > y && same_class(r)) sum += yh - y;
  }
  return percent(sum, records.size());
}

double mdc(std::span<const PredictionRecord> records) {
  double sum = 0;
  for (const auto& r : records) {
    const double y = r.confidence(), yh = r.masked_confidence();
    if (yh < y && same_class(r)) sum += y - yh;
  }
  return percent(sum, records.size());
}

double icr(std::span<const PredictionRecord> records) {
  double count = 0;
  for (const auto& r : records) count += r.masked_confidence() > r.confidence() && same_class(r);
  return percent(count, records.size());
}

FaithfulnessSummary summarize(std::span<const PredictionRecord> records, Reference reference) {
  return {accuracy(records, reference), mic(records), mdc(records), icr(records)};
}

double mask_iou(const PathwayMask& a, const PathwayMask& b) {
  if (a.num_layers() != b.num_layers()) throw ShapeError("mask_iou: layer counts differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    require_same_shape(a.layer(l), b.layer(l), "mask_iou");
    const Tensor &x = a.layer(l), &y = b.layer(l);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const bool p = x[j] != 0.0, q = y[j] != 0.0;
      inter += p && q;
      uni += p || q;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

AciouResult aciou(std::span<const PathwayMask> masks, std::span<const int> classes) {
  if (masks.size() != classes.size()) throw ShapeError("aciou: one class id per mask required");
  AciouResult out;
  std::vector<int> ids;
  const auto groups = group_by_class(classes, ids);
  double class_sum = 0, literal = 0;
  std::size_t counted = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (members.size() < 2) continue;
    double pair_sum = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const PathwayMask &a = masks[members[i]], &b = masks[members[j]];
        if (a.kept_count() == 0 && b.kept_count() == 0) ++out.empty_union_pairs;
        pair_sum += mask_iou(a, b);
        ++pairs;
      }
    }
    const double mean = pair_sum / static_cast<double>(pairs);
    out.per_class[ids[g]] = 100.0 * mean;
    class_sum += mean;
    // ordered pairs count each unordered pair twice
    literal += 2.0 * pair_sum / (2.0 * static_cast<double>(members.size()));
    ++counted;
  }
  out.value = counted ? 100.0 * class_sum / static_cast<double>(counted) : 0.0;
  out.paper_literal = 100.0 * literal;
  return out;
}

double removal_accuracy(const TargetModel& model, const Tensor& inputs, std::span<const PathwayMask> pathways,
                        std::span<const int> labels) {
  const Tensor batch = as_batch(model, inputs);
  if (pathways.size() != batch.dim(0)) throw ShapeError("removal_accuracy: one pathway per sample required");
  if (!labels.empty() && labels.size() != batch.dim(0)) throw ShapeError("removal_accuracy: label count mismatch");
  const auto reference = reference_classes(capture_activations(model, batch).logits, labels);
  std::vector<PathwayMask> removed;
  removed.reserve(pathways.size());
  for (const auto& p : pathways) removed.push_back(p.complement());
  return agreement(masked_logits(model, batch, removed), reference);
}

std::vector<RoapPoint> roap(const TargetModel& model, const Tensor& inputs, std::span<const ScoreField> scores,
                            std::span<const double> grid, Scope scope, std::span<const int> labels) {
  std::vector<RoapPoint> out;
  for (double s : grid) {
    std::vector<PathwayMask> pathways;
    pathways.reserve(scores.size());
    for (const auto& f : scores) pathways.push_back(threshold_to_mask(f, s, scope));
    out.push_back({s, removal_accuracy(model, inputs, pathways, labels)});
  }
  return out;
}

ScoreField random_scores(std::span<const LayerSpec> specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ScoreField out{"random", {}};
  for (const auto& s : specs) {
    Tensor t(s.shape());
    for (double& v : t.values()) v = unit(rng);
    out.layers.push_back(std::move(t));
  }
  return out;
}

PathwayMask class_indicator(std::span<const Tensor> firing_rate, double eps_cn) {
  std::vector<Tensor> masks;
  for (const Tensor& b : firing_rate) {
    Tensor m(b.shape());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = b[j] > eps_cn ? 1.0 : 0.0;
    masks.push_back(std::move(m));
  }
  return PathwayMask(std::move(masks));
}

ClassPathway build_class_pathway(int class_id, std::span<const PathwayMask> masks, std::span<const std::size_t> ids,
                                 double eps_ss, double eps_cn, std::uint64_t seed) {
  if (!(eps_ss >= 0 && eps_ss < 1)) throw ConfigError("eps_ss must be in [0, 1)");
  if (!(eps_cn >= 0 && eps_cn < 1)) throw ConfigError("eps_cn must be in [0, 1)");
  if (masks.empty()) throw ConfigError("class " + std::to_string(class_id) + " has no pathways");
  if (ids.size() != masks.size()) throw ShapeError("build_class_pathway: one id per mask required");

  const std::size_t n = masks.size();
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround((1.0 - eps_ss) * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(keep, n));
  std::sort(order.begin(), order.end());

  ClassPathway out;
  out.class_id = class_id;
  out.eps_ss = eps_ss;
  out.eps_cn = eps_cn;
  for (const auto& t : masks[0].masks()) out.firing_rate.push_back(Tensor::zeros(t.shape()));
  for (std::size_t i : order) {
    out.sample_ids.push_back(ids[i]);
    for (std::size_t l = 0; l < out.firing_rate.size(); ++l) {
      const Tensor& m = masks[i].layer(l);
      require_same_shape(m, out.firing_rate[l], "build_class_pathway");
      for (std::size_t j = 0; j < m.size(); ++j) out.firing_rate[l][j] += m[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(order.size());
  for (auto& b : out.firing_rate) {
    for (double& v : b.values()) v *= inv;
  }
  out.mask = class_indicator(out.firing_rate, eps_cn);
  return out;
}

std::vector<PredictionRecord> transfer_eval(const TargetModel& model, const Tensor& inputs,
                                            std::span<const int> classes,
                                            const std::map<int, ClassPathway>& pathways, std::span<const int> labels) {
  const Tensor batch = as_batch(model, inputs);
  const std::size_t n = batch.dim(0), k = model.num_classes();
  if (classes.size() != n) throw ShapeError("transfer_eval: one class per sample required");
  std::vector<PathwayMask> masks;
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = pathways.find(classes[i]);
    if (it == pathways.end()) throw ConfigError("no class pathway for class " + std::to_string(classes[i]));
    masks.push_back(it->second.mask);
  }
  const Tensor original = capture_activations(model, batch).logits;
  const Tensor masked = masked_logits(model, batch, masks);
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> label;
    if (!labels.empty()) label = static_cast<std::size_t>(labels[i]);
    out.push_back(make_record(std::span<const double>(original.data() + i * k, k),
                              std::span<const double>(masked.data() + i * k, k), label));
  }
  return out;
}

VarianceStats class_variance_stats(const std::vector<std::vector<double>>& embeddings, std::span<const int> classes) {
  if (embeddings.size() != classes.size()) throw ShapeError("class_variance_stats: one class per embedding required");
  if (embeddings.empty()) return {};
  const std::size_t d = embeddings[0].size();
  auto sqdist = [d](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  };
  std::vector<double> global(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw ShapeError("class_variance_stats: embeddings differ in dimension");
    for (std::size_t j = 0; j < d; ++j) global[j] += e[j];
  }
  for (double& v : global) v /= static_cast<double>(embeddings.size());

  std::vector<int> ids;
  const auto groups = group_by_class(classes, ids);
  VarianceStats out;
  for (const auto& members : groups) {
    std::vector<double> centroid(d, 0.0);
    for (std::size_t i : members) {
      for (std::size_t j = 0; j < d; ++j) centroid[j] += embeddings[i][j];
    }
    for (double& v : centroid) v /= static_cast<double>(members.size());
    double spread = 0;
    for (std::size_t i : members) spread += sqdist(embeddings[i], centroid);
    out.within += spread / static_cast<double>(members.size());
    out.between += sqdist(centroid, global);
  }
  out.within /= static_cast<double>(groups.size());
  out.between /= static_cast<double>(groups.size());
  return out;
}

double percent_delta(double a, double b) {
  if (a == 0.0) throw NumericalError("percent_delta: reference value is zero");
  return (b - a) / a * 100.0;
}

Tensor cam_on_pathway(const TargetModel& model, const Tensor& input, const PathwayMask& mask,
                      std::size_t class_index) {
  const MaskedGradients g = masked_gradients(model, input, mask, class_index);
  const std::size_t last = model.num_layers() - 1;
  const Tensor& a = g.activations[last];
  const Tensor& grad = g.layer_grads[last];
  const Tensor& m = mask.layer(last);
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), hw = h * w;
  Tensor cam({1, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    double weight = 0;
    for (std::size_t j = 0; j < hw; ++j) weight += grad[k * hw + j];
    weight /= static_cast<double>(hw);
    for (std::size_t j = 0; j < hw; ++j) cam[j] += weight * a[k * hw + j] * m[k * hw + j];
  }
  for (double& v : cam.values()) v = std::max(v, 0.0);
  const Shape& in = model.input_shape();
  Tensor up = io::resize_bilinear(cam, in[1], in[2]);
  const double peak = *std::max_element(up.values().begin(), up.values().end());
  for (double& v : up.values()) v = peak > 0 ? std::max(v, 0.0) / peak : 0.0;
  return up.reshaped({in[1], in[2]});
}

// ---- reports ---------------------------------------------------------------------

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "genpath.metric_report";
  j["version"] = kSchemaVersion;
  j["metrics"] = metrics;
  j["config"] = config;
  j["series"] = series;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json o;
    o["original_probs"] = r.original_probs;
    o["masked_probs"] = r.masked_probs;
    o["original_class"] = r.original_class;
    o["masked_class"] = r.masked_class;
    if (r.label) o["label"] = *r.label;
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  MetricReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema") != "genpath.metric_report") throw DataError("not a metric report");
    if (j.at("version").get<int>() != kSchemaVersion) throw DataError("unsupported metric report version");
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.series = j.at("series").get<std::map<std::string, std::vector<double>>>();
    for (const auto& o : j.at("records")) {
      PredictionRecord p;
      p.original_probs = o.at("original_probs").get<std::vector<double>>();
      p.masked_probs = o.at("masked_probs").get<std::vector<double>>();
      p.original_class = o.at("original_class").get<std::size_t>();
      p.masked_class = o.at("masked_class").get<std::size_t>();
      if (o.contains("label")) p.label = o.at("label").get<std::size_t>();
      r.records.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

}  // namespace genpath
