// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genpath/instrumentation.hpp"

namespace genpath {

// Names accepted by make_architecture / checkpoints.
std::vector<std::string> architecture_names();

// Builds a named architecture with He-initialised weights drawn from `seed`.
//   alexnet32  - CIFAR-style AlexNet on 3x32x32, five capture points
//   vgg11bn32  - VGG-11 with batch norm on 3x32x32, eight capture points
//   toy3       - three 3x3 conv stages on 3x16x16 (desk-scale experiments)
// `num_classes` of 0 selects the architecture default (10, 10, 2).
TargetModel make_architecture(const std::string& name, std::size_t num_classes = 0, std::uint64_t seed = 0);

}  // namespace genpath
