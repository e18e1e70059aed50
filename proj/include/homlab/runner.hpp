#pragma once

#include <string>

#include "json.hpp"

namespace homlab::runner {

using json = nlohmann::json;

// Baseline config for a command, optionally filled from a named preset.
json default_config(const std::string& command, const std::string& preset = "");

struct RunResult {
    json manifest;
    std::string manifest_path;
};

// Executes the configured pipeline and writes every artifact plus a manifest
// (file list with content hashes) under config["out_dir"]. Throws ConfigError
// for schema problems and NumericalError for failed computations.
RunResult run(const json& config);

// Exit codes: 0 ok, 2 config/schema violation, 3 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace homlab::runner
