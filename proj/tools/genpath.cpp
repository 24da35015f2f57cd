// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "genpath/cli/commands.hpp"

int main(int argc, char** argv) { return genpath::cli::run(argc, argv, std::cout, std::cerr); }
