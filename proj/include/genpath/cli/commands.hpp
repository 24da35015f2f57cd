// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line surface. Every command is first turned into a run manifest
// (JSON, written to the output directory) and then executed from that
// manifest, so `genpath replay <manifest>` repeats a run exactly.
//
//   train     fit a generator against a target checkpoint
//   explain   write one mask file per sample (generator or baseline)
//   eval      faithfulness metrics, acIOU and optional ROAP for mask files
//   transfer  class pathways over eps_ss x eps_cn grids and their transfer
//   viz       CAM / saliency images, embedding scatter, curve plots
//   replay    re-execute a manifest
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data or format
// error, 4 numerical failure.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace genpath::cli {

inline constexpr int kManifestVersion = 1;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Executes a manifest, writing outputs below manifest["out"]. Returns the
// metric report document that was also written to metrics.json.
nlohmann::json execute(const nlohmann::json& manifest, std::ostream& log);

nlohmann::json read_manifest(const std::filesystem::path& path);

}  // namespace genpath::cli
