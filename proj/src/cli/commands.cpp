// SPDX-License-Identifier: Apache-2.0
#include "genpath/cli/commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "genpath/baselines.hpp"
#include "genpath/checkpoint.hpp"
#include "genpath/errors.hpp"
#include "genpath/evaluation.hpp"
#include "genpath/generator.hpp"
#include "genpath/io/dataset.hpp"
#include "genpath/io/image.hpp"
#include "genpath/io/mask_file.hpp"
#include "genpath/training.hpp"
#include "genpath/visualization.hpp"

namespace genpath::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- manifest helpers ---------------------------------------------------------------

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

std::string require_string(const json& m, const char* key) {
  const std::string v = get_or<std::string>(m, key, "");
  if (v.empty()) throw ConfigError(std::string("--") + key + " is required for '" + m.at("command").get<std::string>() + "'");
  return v;
}

io::DatasetSpec dataset_spec(const json& m) {
  const json d = m.at("dataset");
  io::DatasetSpec s;
  s.name = d.at("name").get<std::string>();
  s.path = d.at("path").get<std::string>();
  s.split = d.at("split").get<std::string>();
  s.limit = d.at("limit").get<std::size_t>();
  s.seed = d.at("seed").get<std::uint64_t>();
  s.resolution = d.at("resolution").get<std::size_t>();
  return s;
}

TargetModel load_model(const json& m) {
  const fs::path path = require_string(m, "model");
  if (!fs::exists(path)) throw ConfigError("model checkpoint not found: " + path.string());
  return load_target_model(path);
}

io::Dataset load_data(const json& m, const TargetModel& model) {
  io::Dataset d = io::load_dataset(dataset_spec(m));
  const Shape& want = model.input_shape();
  if (Shape(d.images.shape().begin() + 1, d.images.shape().end()) != want) {
    throw ConfigError("dataset images " + to_string(d.images.shape()) + " do not fit model input " + to_string(want));
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string grid_key(double ss, double cn) {
  std::ostringstream s;
  s << "ss=" << ss << ",cn=" << cn;
  return s.str();
}

json finish(const json& m, MetricReport report, std::ostream& log) {
  report.config["command"] = m.at("command").get<std::string>();
  report.config["seed"] = std::to_string(m.at("seed").get<std::uint64_t>());
  if (m.contains("dataset")) report.config["dataset"] = m.at("dataset").at("name").get<std::string>();
  const fs::path out = m.at("out").get<std::string>();
  const std::string text = report.to_json();
  write_text(out / "metrics.json", text);
  for (const auto& [k, v] : report.metrics) log << "  " << k << " = " << fmt(v) << "\n";
  return json::parse(text);
}

// ---- mask directories ------------------------------------------------------------------

struct IndexEntry {
  std::size_t id = 0;
  std::string file;
  int label = -1;
  std::size_t predicted = 0;
  double sparsity = 0;
};

void write_index(const fs::path& dir, const std::vector<IndexEntry>& entries) {
  std::ostringstream s;
  s << "id,file,label,predicted,firing_sparsity\n";
  for (const auto& e : entries) {
    s << e.id << "," << e.file << "," << e.label << "," << e.predicted << "," << fmt(e.sparsity) << "\n";
  }
  write_text(dir / "index.csv", s.str());
}

std::vector<IndexEntry> read_index(const fs::path& dir) {
  const fs::path path = dir / "index.csv";
  if (!fs::exists(path)) throw ConfigError("mask directory has no index.csv: " + dir.string());
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<IndexEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    IndexEntry e;
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() < 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected id,file,...");
    try {
      e.id = std::stoul(f[0]);
      e.file = f[1];
      if (f.size() > 2) e.label = std::stoi(f[2]);
      if (f.size() > 3) e.predicted = std::stoul(f[3]);
      if (f.size() > 4) e.sparsity = std::stod(f[4]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    out.push_back(e);
  }
  return out;
}

struct MaskSet {
  std::vector<IndexEntry> entries;
  std::vector<PathwayMask> masks;
  Tensor inputs;  // the entries' samples, in index order
  std::vector<int> labels;
};

MaskSet load_masks(const json& m, const TargetModel& model, const io::Dataset& data) {
  const fs::path dir = require_string(m, "masks");
  MaskSet s;
  s.entries = read_index(dir);
  if (s.entries.empty()) throw DataError(dir.string() + "/index.csv lists no masks");
  std::vector<Tensor> samples;
  for (const auto& e : s.entries) {
    if (e.id >= data.size()) {
      throw DataError("mask for sample " + std::to_string(e.id) + " but the dataset has " + std::to_string(data.size()));
    }
    PathwayMask mask = io::read_mask_file(dir / e.file);
    mask.require_matches(model.layer_specs(), "mask file");
    s.masks.push_back(std::move(mask));
    samples.push_back(data.images.slice(e.id));
    s.labels.push_back(data.labels[e.id]);
  }
  s.inputs = Tensor::stack(samples);
  return s;
}

std::string mask_name(std::size_t id) {
  std::ostringstream s;
  s << "sample_" << std::setw(5) << std::setfill('0') << id << ".npwy";
  return s.str();
}

// ---- commands ------------------------------------------------------------------------------

json cmd_train(const json& m, std::ostream& log) {
  const TargetModel model = load_model(m);
  const io::Dataset data = load_data(m, model);
  Generator generator(GeneratorConfig::from_text(m.at("generator_config").get<std::string>()), model.layer_specs());

  const json t = m.at("train");
  TrainConfig tc;
  tc.alpha = t.at("alpha").get<double>();
  tc.beta = t.at("beta").get<double>();
  tc.learning_rate = t.at("lr").get<double>();
  tc.epochs = t.at("epochs").get<std::size_t>();
  tc.batch_size = t.at("batch_size").get<std::size_t>();
  tc.checkpoint_every = t.at("checkpoint_every").get<std::size_t>();
  tc.seed = m.at("seed").get<std::uint64_t>();
  tc.out_dir = m.at("out").get<std::string>();
  const TrainState state = train(model, generator, data.images, tc, [&](const LossRecord& r) {
    log << "epoch " << r.epoch << ": kd " << r.kd << ", sparsity " << r.sparsity << ", total " << r.total
        << ", relaxed-mask sparsity " << r.hard_sparsity << "\n";
  });

  MetricReport report;
  report.metrics["epochs"] = static_cast<double>(state.epoch);
  report.metrics["steps"] = static_cast<double>(state.step);
  report.metrics["checkpoints"] = static_cast<double>(state.checkpoints.size());
  report.metrics["target_checksum"] = static_cast<double>(model.checksum());
  if (!state.history.empty()) {
    const LossRecord& last = state.history.back();
    report.metrics["final_kd"] = last.kd;
    report.metrics["final_sparsity"] = last.sparsity;
    report.metrics["final_total"] = last.total;
    report.metrics["best_epoch"] = static_cast<double>(state.best_epoch);
    for (const auto& r : state.history) report.series["total"].push_back(r.total);
  }
  return finish(m, std::move(report), log);
}

json cmd_explain(const json& m, std::ostream& log) {
  const TargetModel model = load_model(m);
  const io::Dataset data = load_data(m, model);
  const std::string method = m.at("method").get<std::string>();
  const double sparsity = m.at("sparsity").get<double>();
  const Scope scope = m.at("scope").get<std::string>() == "global" ? Scope::kGlobal : Scope::kPerLayer;
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  const fs::path dir = fs::path(m.at("out").get<std::string>()) / "masks";
  fs::create_directories(dir);

  std::vector<PathwayMask> masks;
  std::vector<std::size_t> predicted;
  if (method == "genpath") {
    Generator generator = load_generator(require_string(m, "generator"));
    for (auto& p : generate_pathways(model, data.images, generator, Mode::kEval)) {
      predicted.push_back(argmax(p.logits.values()));
      masks.push_back(std::move(p.mask));
    }
  } else {
    const Tensor logits = capture_activations(model, data.images).logits;
    const std::size_t k = model.num_classes();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t cls = argmax(std::span<const double>(logits.data() + i * k, k));
      predicted.push_back(cls);
      const Tensor x = data.images.slice(i);
      if (method == "random") {
        masks.push_back(random_mask(model.layer_specs(), sparsity, seed + i));
      } else if (method == "greedy") {
        masks.push_back(greedy_prune(model, x, taylor_importance(model, x, cls)).mask);
      } else {
        masks.push_back(threshold_to_mask(importance_by_name(method, model, x, cls), sparsity, scope));
      }
    }
  }

  std::vector<IndexEntry> index;
  double sum = 0, sum2 = 0, lo = 1, hi = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::string file = mask_name(i);
    io::write_mask_file(dir / file, masks[i]);
    const double s = masks[i].firing_sparsity();
    index.push_back({i, file, data.labels[i], predicted[i], s});
    sum += s;
    sum2 += s * s;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  write_index(dir, index);
  const double n = static_cast<double>(masks.size());
  MetricReport report;
  report.config["method"] = method;
  report.metrics["count"] = n;
  report.metrics["mean_sparsity"] = sum / n;
  report.metrics["std_sparsity"] = std::sqrt(std::max(0.0, sum2 / n - (sum / n) * (sum / n)));
  report.metrics["min_sparsity"] = lo;
  report.metrics["max_sparsity"] = hi;
  for (const auto& e : index) report.series["sparsity"].push_back(e.sparsity);
  log << "wrote " << masks.size() << " masks to " << dir.string() << "\n";
  return finish(m, std::move(report), log);
}

std::vector<ScoreField> roap_scores(const json& m, const TargetModel& model, const MaskSet& set,
                                    const std::string& method) {
  std::vector<ScoreField> scores;
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  if (method == "genpath") {
    Generator generator = load_generator(require_string(m, "generator"));
    for (auto& p : generate_pathways(model, set.inputs, generator, Mode::kEval)) {
      scores.push_back({"genpath", std::move(p.scores.decoded)});
    }
    return scores;
  }
  const Tensor logits = capture_activations(model, set.inputs).logits;
  const std::size_t k = model.num_classes();
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    if (method == "random") {
      scores.push_back(random_scores(model.layer_specs(), seed + set.entries[i].id));
    } else {
      const std::size_t cls = argmax(std::span<const double>(logits.data() + i * k, k));
      scores.push_back(importance_by_name(method, model, set.inputs.slice(i), cls));
    }
  }
  return scores;
}

json cmd_eval(const json& m, std::ostream& log) {
  const TargetModel model = load_model(m);
  const io::Dataset data = load_data(m, model);
  const MaskSet set = load_masks(m, model, data);
  const std::size_t n = set.entries.size(), k = model.num_classes();
  const Tensor original = capture_activations(model, set.inputs).logits;
  const Tensor masked = masked_forward(model, set.inputs, set.masks);

  MetricReport report;
  std::vector<int> classes;
  double sparsity = 0;
  for (std::size_t i = 0; i < n; ++i) {
    report.records.push_back(make_record(std::span<const double>(original.data() + i * k, k),
                                         std::span<const double>(masked.data() + i * k, k),
                                         static_cast<std::size_t>(set.labels[i])));
    classes.push_back(static_cast<int>(report.records.back().original_class));
    sparsity += set.masks[i].firing_sparsity();
  }
  const FaithfulnessSummary s = summarize(report.records);
  report.metrics["accuracy"] = s.accuracy;
  report.metrics["accuracy_label"] = accuracy(report.records, Reference::kLabel);
  report.metrics["mic"] = s.mic;
  report.metrics["mdc"] = s.mdc;
  report.metrics["icr"] = s.icr;
  report.metrics["mean_sparsity"] = sparsity / static_cast<double>(n);
  const AciouResult iou = aciou(set.masks, classes);
  report.metrics["aciou"] = iou.value;
  report.metrics["aciou_paper_literal"] = iou.paper_literal;

  // per-layer sparsity breakdown
  std::vector<double> layer(model.num_layers(), 0.0);
  for (const auto& mask : set.masks) {
    const auto ls = mask.layer_sparsity();
    for (std::size_t l = 0; l < ls.size(); ++l) layer[l] += ls[l] / static_cast<double>(n);
  }
  report.series["layer_sparsity"] = layer;

  const std::string roap_method = get_or<std::string>(m, "roap", "");
  if (!roap_method.empty()) {
    const auto grid = m.at("sparsity_grid").get<std::vector<double>>();
    const auto scores = roap_scores(m, model, set, roap_method);
    const auto curve = roap(model, set.inputs, scores, grid);
    std::ostringstream csv;
    csv << "sparsity,accuracy\n";
    for (const auto& p : curve) {
      csv << fmt(p.sparsity) << "," << fmt(p.accuracy) << "\n";
      report.series["roap_sparsity"].push_back(p.sparsity);
      report.series["roap_accuracy"].push_back(p.accuracy);
    }
    write_text(fs::path(m.at("out").get<std::string>()) / "roap.csv", csv.str());
    report.config["roap_method"] = roap_method;
  }
  return finish(m, std::move(report), log);
}

json cmd_transfer(const json& m, std::ostream& log) {
  const TargetModel model = load_model(m);
  const io::Dataset data = load_data(m, model);
  const MaskSet set = load_masks(m, model, data);
  const fs::path out = m.at("out").get<std::string>();
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  const auto ss_grid = m.at("eps_ss").get<std::vector<double>>();
  const auto cn_grid = m.at("eps_cn").get<std::vector<double>>();

  const Tensor logits = capture_activations(model, set.inputs).logits;
  const std::size_t k = model.num_classes(), n = set.entries.size();
  std::vector<int> classes;
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    classes.push_back(static_cast<int>(argmax(std::span<const double>(logits.data() + i * k, k))));
    members[classes.back()].push_back(i);
  }

  MetricReport report;
  const Tensor inst = masked_forward(model, set.inputs, set.masks);
  std::vector<PredictionRecord> instance;
  for (std::size_t i = 0; i < n; ++i) {
    instance.push_back(make_record(std::span<const double>(logits.data() + i * k, k),
                                   std::span<const double>(inst.data() + i * k, k)));
  }
  report.metrics["instance/accuracy"] = accuracy(instance);

  std::ostringstream csv;
  csv << "eps_ss,eps_cn,class,kept,accuracy,mic,mdc,icr\n";
  for (double ss : ss_grid) {
    for (double cn : cn_grid) {
      std::map<int, ClassPathway> pathways;
      for (const auto& [c, idx] : members) {
        std::vector<PathwayMask> masks;
        std::vector<std::size_t> ids;
        for (std::size_t i : idx) {
          masks.push_back(set.masks[i]);
          ids.push_back(set.entries[i].id);
        }
        ClassPathway p = build_class_pathway(c, masks, ids, ss, cn, seed + static_cast<std::uint64_t>(c));
        std::ostringstream stem;
        stem << "ss" << ss << "_cn" << cn << "_class" << c;
        io::write_mask_file(out / "class_pathways" / (stem.str() + ".npwy"), p.mask);
        json side;
        side["class"] = c;
        side["eps_ss"] = ss;
        side["eps_cn"] = cn;
        side["sample_ids"] = p.sample_ids;
        side["kept"] = p.mask.kept_count();
        side["seed"] = seed + static_cast<std::uint64_t>(c);
        write_text(out / "class_pathways" / (stem.str() + ".json"), side.dump(2) + "\n");
        pathways.emplace(c, std::move(p));
      }
      const auto records = transfer_eval(model, set.inputs, classes, pathways);
      const FaithfulnessSummary s = summarize(records);
      const std::string key = grid_key(ss, cn);
      report.metrics[key + "/accuracy"] = s.accuracy;
      report.metrics[key + "/mic"] = s.mic;
      report.metrics[key + "/mdc"] = s.mdc;
      report.metrics[key + "/icr"] = s.icr;
      for (const auto& [c, p] : pathways) {
        report.metrics[key + "/kept_class" + std::to_string(c)] = static_cast<double>(p.mask.kept_count());
        csv << fmt(ss) << "," << fmt(cn) << "," << c << "," << p.mask.kept_count() << "," << fmt(s.accuracy) << ","
            << fmt(s.mic) << "," << fmt(s.mdc) << "," << fmt(s.icr) << "\n";
      }
    }
  }
  write_text(out / "transfer.csv", csv.str());
  return finish(m, std::move(report), log);
}

std::vector<double> flat(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

json cmd_viz(const json& m, std::ostream& log) {
  const TargetModel model = load_model(m);
  const io::Dataset data = load_data(m, model);
  const MaskSet set = load_masks(m, model, data);
  const fs::path out = m.at("out").get<std::string>();
  const std::size_t count = std::min(m.at("count").get<std::size_t>(), set.entries.size());
  const Shape& in = model.input_shape();
  MetricReport report;

  const Tensor logits = capture_activations(model, set.inputs).logits;
  const std::size_t k = model.num_classes();
  std::vector<int> classes;
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    classes.push_back(static_cast<int>(argmax(std::span<const double>(logits.data() + i * k, k))));
  }

  for (std::size_t i = 0; i < count; ++i) {
    const Tensor x = set.inputs.slice(i);
    const std::size_t cls = static_cast<std::size_t>(classes[i]);
    Tensor rgb = data.denormalize(x);
    if (in[0] == 1) {
      Tensor three({3, in[1], in[2]});
      for (std::size_t c = 0; c < 3; ++c) std::copy(rgb.values().begin(), rgb.values().end(), three.data() + c * rgb.size());
      rgb = std::move(three);
    }
    const std::string stem = "sample_" + std::to_string(set.entries[i].id);
    const Tensor cam = cam_on_pathway(model, x, set.masks[i], cls);
    io::write_pnm(out / (stem + "_cam.ppm"), io::to_image(io::overlay_heatmap(rgb, cam)));
    const Tensor sal = pathway_saliency(model, x, set.masks[i], cls);
    io::write_pnm(out / (stem + "_saliency.pgm"), io::to_image(sal.reshaped({1, in[1], in[2]})));
  }

  // embedding statistics: raw activations against generator scores
  const Capture cap = capture_activations(model, set.inputs);
  std::vector<GeneratedPathway> generated;
  const std::string gen_path = get_or<std::string>(m, "generator", "");
  if (!gen_path.empty()) {
    Generator generator = load_generator(gen_path);
    generated = generate_pathways(model, set.inputs, generator, Mode::kEval);
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    std::vector<std::vector<double>> acts;
    for (std::size_t i = 0; i < set.entries.size(); ++i) acts.push_back(flat(cap.activations.layers[l].slice(i)));
    const VarianceStats a = class_variance_stats(acts, classes);
    const std::string key = "layer" + std::to_string(l);
    report.metrics[key + "/acts_within"] = a.within;
    report.metrics[key + "/acts_between"] = a.between;
    io::write_pnm(out / (key + "_acts_scatter.ppm"), io::scatter_plot(project_2d(acts), classes));
    if (!generated.empty()) {
      std::vector<std::vector<double>> scores;
      for (const auto& g : generated) scores.push_back(flat(g.scores.pdn_scores[l]));
      const VarianceStats b = class_variance_stats(scores, classes);
      report.metrics[key + "/scores_within"] = b.within;
      report.metrics[key + "/scores_between"] = b.between;
      if (a.within > 0) report.metrics[key + "/within_delta_pct"] = percent_delta(a.within, b.within);
      if (a.between > 0) report.metrics[key + "/between_delta_pct"] = percent_delta(a.between, b.between);
      io::write_pnm(out / (key + "_scores_scatter.ppm"), io::scatter_plot(project_2d(scores), classes));
    }
  }

  // curves from exported comma-separated files: first column is x
  for (const auto& curve : get_or<std::vector<std::string>>(m, "curves", {})) {
    std::istringstream in_csv(read_text(curve));
    std::string line;
    std::getline(in_csv, line);
    std::vector<double> x;
    std::vector<std::vector<double>> ys;
    while (std::getline(in_csv, line)) {
      std::istringstream ls(line);
      std::string cell;
      std::vector<double> row;
      while (std::getline(ls, cell, ',')) {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw DataError(curve + ": non-numeric cell '" + cell + "'");
        }
      }
      if (row.empty()) continue;
      x.push_back(row[0]);
      if (ys.size() < row.size() - 1) ys.resize(row.size() - 1);
      for (std::size_t c = 1; c < row.size(); ++c) ys[c - 1].push_back(row[c]);
    }
    io::write_pnm(out / (fs::path(curve).stem().string() + "_plot.ppm"), io::line_plot(x, ys));
  }
  report.metrics["images"] = static_cast<double>(count);
  log << "rendered " << count << " samples into " << out.string() << "\n";
  return finish(m, std::move(report), log);
}

// ---- argument parsing -------------------------------------------------------------------

struct DataFlags {
  std::string name = "two-blob";
  std::string path;
  std::string split = "test";
  std::size_t limit = 0;
  std::uint64_t seed = 0;
  std::size_t resolution = 32;
};

void add_data_flags(CLI::App* app, DataFlags& d) {
  app->add_option("--dataset", d.name, "cifar10 | imagedir | two-blob")->capture_default_str();
  app->add_option("--data-path", d.path, "dataset file or directory");
  app->add_option("--split", d.split, "train | test")->capture_default_str();
  app->add_option("--limit", d.limit, "use at most this many samples (0: all)");
  app->add_option("--data-seed", d.seed, "seed of the synthetic dataset")->capture_default_str();
  app->add_option("--resolution", d.resolution, "imagedir resize target")->capture_default_str();
}

json data_json(const DataFlags& d) {
  return json{{"name", d.name},   {"path", d.path}, {"split", d.split},
              {"limit", d.limit}, {"seed", d.seed}, {"resolution", d.resolution}};
}

std::string resolve_out(const std::string& flag, const std::string& command) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GENPATH_OUT"); env && *env) return env;
  return "genpath_" + command;
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() == 0) {
    if (const char* env = std::getenv("GENPATH_SEED"); env && *env) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("GENPATH_SEED is not an integer: ") + env);
      }
    }
  }
  return value;
}

std::string abs_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

void record_normalization(json& m) {
  // Normalization constants are fixed per dataset kind; record them so the
  // manifest documents the exact preprocessing.
  const std::string name = m.at("dataset").at("name").get<std::string>();
  if (name == "cifar10") {
    m["normalization"] = {{"mean", {0.4914, 0.4822, 0.4465}}, {"std", {0.2470, 0.2435, 0.2616}}};
  } else {
    m["normalization"] = {{"mean", {0.5, 0.5, 0.5}}, {"std", {0.5, 0.5, 0.5}}};
  }
}

}  // namespace

json read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("manifest not found: " + path.string());
  json m;
  try {
    m = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
  if (get_or<std::string>(m, "schema", "") != "genpath.manifest") throw DataError(path.string() + " is not a manifest");
  if (get_or<int>(m, "version", 0) != kManifestVersion) throw DataError(path.string() + ": unsupported manifest version");
  return m;
}

json execute(const json& manifest, std::ostream& log) {
  const std::string command = manifest.at("command").get<std::string>();
  const fs::path out = manifest.at("out").get<std::string>();
  fs::create_directories(out);
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  log << command << " -> " << out.string() << "\n";
  try {
    if (command == "train") return cmd_train(manifest, log);
    if (command == "explain") return cmd_explain(manifest, log);
    if (command == "eval") return cmd_eval(manifest, log);
    if (command == "transfer") return cmd_transfer(manifest, log);
    if (command == "viz") return cmd_viz(manifest, log);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest field error: ") + e.what());
  }
  throw ConfigError("unknown command '" + command + "'");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative neural pathway explanations for convolutional classifiers", "genpath"};
  app.require_subcommand(1);

  std::string model, out_dir, generator, generator_config, method = "genpath", scope = "per_layer", masks, roap_method;
  std::string replay_path, replay_out;
  double alpha = 1.0, beta = 0.001, lr = 1e-3, sparsity = 0.5;
  std::size_t epochs = 10, batch_size = 32, checkpoint_every = 1, count = 8;
  std::uint64_t seed = 0;
  std::vector<double> grid{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<double> eps_ss{0.6}, eps_cn{0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::string> curves;
  DataFlags data;

  std::map<std::string, CLI::Option*> seed_opts;
  auto common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--model", model, "target model checkpoint");
    sub->add_option("--out", out_dir, "output directory (env GENPATH_OUT)");
    seed_opts[sub->get_name()] = sub->add_option("--seed", seed, "random seed (env GENPATH_SEED)");
    if (needs_data) add_data_flags(sub, data);
  };

  CLI::App* train = app.add_subcommand("train", "fit a generator against a target model");
  common(train, true);
  train->add_option("--alpha", alpha, "distillation weight")->capture_default_str();
  train->add_option("--beta", beta, "sparsity weight")->capture_default_str();
  train->add_option("--lr", lr, "learning rate")->capture_default_str();
  train->add_option("--epochs", epochs, "epochs")->capture_default_str();
  train->add_option("--batch-size", batch_size)->capture_default_str();
  train->add_option("--checkpoint-every", checkpoint_every, "epochs between checkpoints (0: final only)");
  train->add_option("--generator-config", generator_config, "key = value generator configuration file");

  CLI::App* explain = app.add_subcommand("explain", "write a pathway mask file per sample");
  common(explain, true);
  explain->add_option("--generator", generator, "trained generator checkpoint (method genpath)");
  explain->add_option("--method", method, "genpath | taylor | intgrad | magnitude | random | greedy")
      ->capture_default_str();
  explain->add_option("--sparsity", sparsity, "firing sparsity for thresholded baselines")->capture_default_str();
  explain->add_option("--scope", scope, "per_layer | global")->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "faithfulness metrics for a mask directory");
  common(eval, true);
  eval->add_option("--masks", masks, "directory written by explain")->required();
  eval->add_option("--roap", roap_method, "also run ROAP with this method's scores");
  eval->add_option("--generator", generator, "generator checkpoint for --roap genpath");
  eval->add_option("--sparsity-grid", grid, "ROAP sparsities")->delimiter(',');

  CLI::App* transfer = app.add_subcommand("transfer", "class pathways and their transfer accuracy");
  common(transfer, true);
  transfer->add_option("--masks", masks, "directory written by explain")->required();
  transfer->add_option("--eps-ss", eps_ss, "sample sparsity grid")->delimiter(',');
  transfer->add_option("--eps-cn", eps_cn, "class neuron threshold grid")->delimiter(',');

  CLI::App* viz = app.add_subcommand("viz", "render CAM, saliency, embedding and curve images");
  common(viz, true);
  viz->add_option("--masks", masks, "directory written by explain")->required();
  viz->add_option("--generator", generator, "generator checkpoint for score embeddings");
  viz->add_option("--count", count, "samples to render")->capture_default_str();
  viz->add_option("--curve", curves, "comma-separated data file to plot (repeatable)");

  CLI::App* replay = app.add_subcommand("replay", "re-run a command from its manifest");
  replay->add_option("manifest", replay_path, "manifest.json")->required();
  replay->add_option("--out", replay_out, "output directory (default: <out>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    const int rc = app.exit(e, help, err);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    json manifest;
    if (replay->parsed()) {
      manifest = read_manifest(replay_path);
      const std::string dest =
          replay_out.empty() ? (fs::path(manifest.at("out").get<std::string>()) / "replay").string() : replay_out;
      manifest["out"] = abs_path(dest);
    } else {
      CLI::App* sub = app.get_subcommands().front();
      const std::string command = sub->get_name();
      manifest = {{"schema", "genpath.manifest"}, {"version", kManifestVersion}, {"command", command}};
      manifest["model"] = abs_path(model);
      manifest["out"] = abs_path(resolve_out(out_dir, command));
      manifest["seed"] = resolve_seed(seed_opts.at(command), seed);
      DataFlags d = data;
      d.path = abs_path(d.path);
      if (command == "train" && sub->get_option("--split")->count() == 0) d.split = "train";
      manifest["dataset"] = data_json(d);
      record_normalization(manifest);
      if (command == "train") {
        // an explicit config file keeps its own seed; otherwise --seed seeds
        // the generator's initialization too
        GeneratorConfig gc;
        if (!generator_config.empty()) {
          gc = GeneratorConfig::load(generator_config);
        } else {
          gc.seed = manifest["seed"].get<std::uint64_t>();
        }
        manifest["generator_config"] = gc.to_text();
        manifest["train"] = {{"alpha", alpha},       {"beta", beta},
                             {"lr", lr},             {"epochs", epochs},
                             {"batch_size", batch_size}, {"checkpoint_every", checkpoint_every}};
      } else {
        manifest["generator"] = abs_path(generator);
      }
      if (command == "explain") {
        manifest["method"] = method;
        manifest["sparsity"] = sparsity;
        manifest["scope"] = scope;
      }
      if (command == "eval" || command == "transfer" || command == "viz") manifest["masks"] = abs_path(masks);
      if (command == "eval") {
        manifest["roap"] = roap_method;
        manifest["sparsity_grid"] = grid;
      }
      if (command == "transfer") {
        manifest["eps_ss"] = eps_ss;
        manifest["eps_cn"] = eps_cn;
      }
      if (command == "viz") {
        manifest["count"] = count;
        std::vector<std::string> abs;
        for (const auto& c : curves) abs.push_back(abs_path(c));
        manifest["curves"] = abs;
      }
    }
    execute(manifest, out);
    return 0;
  } catch (const Error& e) {
    err << "genpath: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    err << "genpath: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    err << "genpath: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace genpath::cli
