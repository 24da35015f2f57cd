// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for unit and acceptance tests: hand-built tiny models,
// finite-difference oracles, scratch directories and the desk-scale trained
// setup (toy3 on two-blob plus a trained generator).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "genpath/generator.hpp"
#include "genpath/instrumentation.hpp"
#include "genpath/io/dataset.hpp"

namespace fixtures {

using genpath::PathwayMask;
using genpath::TargetModel;
using genpath::Tensor;

// Single 1x1 convolution (one channel in and out, given weight and bias), a
// ReLU capture point and a 1-output dense head with weight 1 summing the
// map. Input shape (1, h, w).
TargetModel one_conv_model(double weight, double bias, std::size_t h = 1, std::size_t w = 1);

// Three small conv stages with random weights (input 2x6x6, two classes).
// Smooth enough for finite differences away from ReLU kinks.
TargetModel tiny3(std::uint64_t seed);

// Same stages with every ReLU input kept positive (positive weights and
// inputs), so the network is linear on the inputs used.
TargetModel linear_tiny(std::uint64_t seed);

Tensor random_tensor(const genpath::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
PathwayMask random_binary_mask(const std::vector<genpath::LayerSpec>& specs, double keep, std::uint64_t seed);

// Central difference of f at x[i] with step h.
double central_difference(const std::function<double(const Tensor&)>& f, Tensor x, std::size_t i, double h = 1e-4);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

// Trained desk-scale setup, built once per process.
struct Desk {
  genpath::io::Dataset train, test;
  TargetModel model;
  double model_train_accuracy = 0, model_test_accuracy = 0;
  genpath::Generator generator;
  double beta = 0;
  std::size_t epochs = 0;
  double train_seconds = 0;
  std::vector<genpath::GeneratedPathway> pathways;  // eval mode, one per test sample
};
const Desk& desk();

// Hyperparameters of the desk run.
inline constexpr double kDeskBeta = 0.001;
inline constexpr double kDeskLearningRate = 1e-3;
inline constexpr std::size_t kDeskEpochs = 10;

}  // namespace fixtures
