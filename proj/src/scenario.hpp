#pragma once

// Scenario runner: dispatches figure-style experiments over the library,
// writes CSV datasets and a run manifest into the scenario output directory.

#include <string>

#include "config.hpp"

namespace fms {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Runs the scenario and writes its CSV files plus run_manifest.json into
// s.output_dir (created if needed; override non-empty replaces it). A manifest
// is emitted for every run, success or failure. Throws on failure after the
// manifest is written; NumericError signals a numerical-validity failure.
void run_scenario(const Scenario& s, const std::string& output_dir_override = "");

}  // namespace fms
