// SPDX-License-Identifier: Apache-2.0
// Fits the toy3 classifier on the synthetic two-blob training split and
// writes a target checkpoint, giving the CLI something to explain.
//
//   make_toy_model <out.gpck> [--seed N] [--data-seed N] [--epochs N]

#include <CLI11.hpp>

#include <iostream>

#include "genpath/architectures.hpp"
#include "genpath/checkpoint.hpp"
#include "genpath/errors.hpp"
#include "genpath/fixture.hpp"
#include "genpath/io/dataset.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fit the toy3 classifier on two-blob", "make_toy_model"};
  std::string out;
  std::uint64_t seed = 1, data_seed = 0;
  std::size_t epochs = 5;
  app.add_option("out", out, "checkpoint path")->required();
  app.add_option("--seed", seed, "initialization and shuffling seed")->capture_default_str();
  app.add_option("--data-seed", data_seed, "two-blob dataset seed")->capture_default_str();
  app.add_option("--epochs", epochs)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    using namespace genpath;
    const auto train = io::load_dataset({"two-blob", "", "train", 0, data_seed});
    const auto test = io::load_dataset({"two-blob", "", "test", 0, data_seed});
    TargetModel model = make_architecture("toy3", 2, seed);
    const double fit = fit_classifier(model, train.images, train.labels, {epochs, 32, 2e-3, seed});
    const double held = classification_accuracy(model, test.images, test.labels);
    save_target_model(out, model);
    std::cout << "train accuracy " << fit * 100 << "%, test accuracy " << held * 100 << "%\n"
              << "wrote " << out << "\n";
  } catch (const genpath::Error& e) {
    std::cerr << "make_toy_model: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
  return 0;
}
