// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "genpath/architectures.hpp"
#include "genpath/baselines.hpp"
#include "genpath/checkpoint.hpp"
#include "genpath/cli/commands.hpp"
#include "genpath/io/binary.hpp"
#include "genpath/io/mask_file.hpp"
#include "support/fixtures.hpp"

using namespace genpath;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "genpath");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Untrained toy3 checkpoint plus the shared data flags.
struct Workspace {
  fs::path dir, model;
  std::vector<std::string> data{"--dataset", "two-blob", "--data-seed", "7", "--limit", "12"};

  Workspace() : dir(fixtures::scratch_dir("cli")), model(dir / "toy.gpck") {
    save_target_model(model, make_architecture("toy3", 0, 1));
  }
  std::vector<std::string> with(std::vector<std::string> args) const {
    args.insert(args.end(), data.begin(), data.end());
    return args;
  }
};

}  // namespace

TEST_CASE("usage and configuration errors exit with 2") {
  Workspace w;
  const Result missing = invoke(w.with({"explain", "--model", (w.dir / "nope.gpck").string(), "--method", "random",
                                     "--out", (w.dir / "x").string()}));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.gpck") != std::string::npos);
  CHECK(invoke({"explain", "--bogus"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke(w.with({"explain", "--model", w.model.string(), "--method", "nonsense", "--out",
                    (w.dir / "y").string()}))
            .code == 2);
}

TEST_CASE("zero-epoch training writes the manifest and leaves the generator at its initialization") {
  Workspace w;
  const fs::path out = w.dir / "train0";
  const Result r = invoke(w.with({"train", "--model", w.model.string(), "--epochs", "0", "--seed", "11", "--out",
                               out.string()}));
  REQUIRE(r.code == 0);
  const json m = read_json(out / "manifest.json");
  CHECK(m["command"] == "train");
  CHECK(m["train"]["epochs"] == 0);
  CHECK(m["seed"] == 11);
  const Generator trained = load_generator(out / "generator.gpck");
  const Generator fresh(GeneratorConfig::from_text(m["generator_config"].get<std::string>()),
                        load_target_model(w.model).layer_specs());
  const auto a = trained.state(), b = fresh.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].second == b[i].second);
}

TEST_CASE("short training emits checkpoints and a loss curve") {
  Workspace w;
  const fs::path out = w.dir / "train1";
  REQUIRE(invoke(w.with({"train", "--model", w.model.string(), "--epochs", "2", "--batch-size", "6", "--out",
                      out.string()}))
              .code == 0);
  CHECK(fs::exists(out / "generator_epoch1.gpck"));
  CHECK(fs::exists(out / "generator_epoch2.gpck"));
  CHECK(fs::exists(out / "loss.csv"));
  CHECK(read_json(out / "metrics.json")["metrics"]["steps"] == 4);
}

TEST_CASE("random explanations keep the exact per-layer counts") {
  Workspace w;
  const fs::path out = w.dir / "random";
  REQUIRE(invoke(w.with({"explain", "--model", w.model.string(), "--method", "random", "--sparsity", "0.95", "--seed",
                      "5", "--out", out.string()}))
              .code == 0);
  const TargetModel m = load_target_model(w.model);
  for (std::size_t i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.npwy", i);
    const PathwayMask p = io::read_mask_file(out / "masks" / name);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      double kept = 0;
      for (double v : p.layer(l).values()) kept += v;
      CHECK(kept == static_cast<double>(kept_count(m.layer_specs()[l].size(), 0.95)));
    }
    CHECK(p == random_mask(m.layer_specs(), 0.95, 5 + i));
  }
}

TEST_CASE("identity masks evaluate to perfect agreement; corrupt masks exit with 3") {
  Workspace w;
  const fs::path masks = w.dir / "ones";
  REQUIRE(invoke(w.with({"explain", "--model", w.model.string(), "--method", "random", "--sparsity", "0", "--out",
                      masks.string()}))
              .code == 0);
  const fs::path ev = w.dir / "ones_eval";
  REQUIRE(invoke(w.with({"eval", "--model", w.model.string(), "--masks", (masks / "masks").string(), "--out",
                      ev.string()}))
              .code == 0);
  const json metrics = read_json(ev / "metrics.json")["metrics"];
  CHECK(metrics["accuracy"] == 100.0);
  CHECK(metrics["mic"] == 0.0);
  CHECK(metrics["mdc"] == 0.0);

  auto bytes = io::read_file(masks / "masks" / "sample_00003.npwy");
  bytes[bytes.size() - 7] ^= 0x01;
  io::write_file(masks / "masks" / "sample_00003.npwy", bytes);
  const Result bad = invoke(w.with({"eval", "--model", w.model.string(), "--masks", (masks / "masks").string(),
                                 "--out", (w.dir / "bad_eval").string()}));
  CHECK(bad.code == 3);
  CHECK(bad.err.find("sample_00003") != std::string::npos);
}

TEST_CASE("transfer grid rows and the union property at eps_cn 0") {
  Workspace w;
  const fs::path masks = w.dir / "tm";
  REQUIRE(invoke(w.with({"explain", "--model", w.model.string(), "--method", "taylor", "--sparsity", "0.7", "--out",
                      masks.string()}))
              .code == 0);
  const fs::path out = w.dir / "tr";
  REQUIRE(invoke(w.with({"transfer", "--model", w.model.string(), "--masks", (masks / "masks").string(), "--eps-ss",
                      "0,0.5", "--eps-cn", "0,0.3,0.6", "--out", out.string()}))
              .code == 0);
  std::ifstream csv(out / "transfer.csv");
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  std::set<std::string> grid_points;
  while (std::getline(csv, line)) {
    ++rows;
    grid_points.insert(line.substr(0, line.find(',', line.find(',') + 1)));
  }
  CHECK(grid_points.size() == 6);
  CHECK(rows % 6 == 0);

  // with eps_ss 0 every class sample is used, so P_c covers each instance mask
  const json sidecar = read_json(out / "class_pathways" / "ss0_cn0_class0.json");
  const PathwayMask pc = io::read_mask_file(out / "class_pathways" / "ss0_cn0_class0.npwy");
  for (const auto& id : sidecar["sample_ids"]) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.npwy", id.get<std::size_t>());
    const auto inst = io::read_mask_file(masks / "masks" / name).flatten();
    const auto cls = pc.flatten();
    for (std::size_t j = 0; j < inst.size(); ++j)
      if (inst[j] == 1.0) CHECK(cls[j] == 1.0);
  }
}

TEST_CASE("replay reproduces a run from its manifest") {
  Workspace w;
  const fs::path masks = w.dir / "rp";
  REQUIRE(invoke(w.with({"explain", "--model", w.model.string(), "--method", "intgrad", "--sparsity", "0.6", "--out",
                      masks.string()}))
              .code == 0);
  const fs::path ev = w.dir / "rp_eval";
  REQUIRE(invoke(w.with({"eval", "--model", w.model.string(), "--masks", (masks / "masks").string(), "--roap",
                      "random", "--sparsity-grid", "0.2,0.5", "--out", ev.string()}))
              .code == 0);
  REQUIRE(invoke({"replay", (ev / "manifest.json").string()}).code == 0);
  const json a = read_json(ev / "metrics.json"), b = read_json(ev / "replay" / "metrics.json");
  CHECK(a["metrics"] == b["metrics"]);
  CHECK(a["series"] == b["series"]);

  REQUIRE(invoke({"replay", (masks / "manifest.json").string(), "--out", (w.dir / "rp2").string()}).code == 0);
  for (const char* f : {"sample_00000.npwy", "sample_00011.npwy", "index.csv"})
    CHECK(io::read_file(masks / "masks" / f) == io::read_file(w.dir / "rp2" / "masks" / f));
}

TEST_CASE("visualization outputs") {
  Workspace w;
  const fs::path masks = w.dir / "vm";
  REQUIRE(invoke(w.with({"explain", "--model", w.model.string(), "--method", "magnitude", "--sparsity", "0.5", "--out",
                      masks.string()}))
              .code == 0);
  const fs::path out = w.dir / "viz";
  REQUIRE(invoke(w.with({"viz", "--model", w.model.string(), "--masks", (masks / "masks").string(), "--count", "2",
                      "--out", out.string()}))
              .code == 0);
  CHECK(fs::exists(out / "sample_0_cam.ppm"));
  CHECK(fs::exists(out / "sample_1_saliency.pgm"));
  CHECK(fs::exists(out / "layer0_acts_scatter.ppm"));
}

#ifdef GENPATH_CLI_PATH
TEST_CASE("the installed binary maps errors to exit codes") {
  Workspace w;
  const std::string bin = GENPATH_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
  CHECK(status(std::system((bin + " --help" + quiet).c_str())) == 0);
  CHECK(status(std::system((bin + " explain --model " + (w.dir / "none.gpck").string() + " --out " +
                            (w.dir / "z").string() + quiet)
                               .c_str())) == 2);
  {
    std::ofstream bad(w.dir / "bad.gpck", std::ios::binary);
    bad << "GPCK garbage";
  }
  CHECK(status(std::system((bin + " explain --model " + (w.dir / "bad.gpck").string() + " --out " +
                            (w.dir / "z2").string() + quiet)
                               .c_str())) == 3);
}
#endif
