#pragma once

#include <iosfwd>
#include <string>

#include "cstg/cli_config.hpp"
#include "cstg/training.hpp"

namespace cstg::cli {

// Exit codes: 0 success, 2 usage/config, 3 runtime/training, 4 I/O.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

int exit_code_for(const Error& e);

// Runs one training pipeline (grid search / cross-validation / single split
// per the config) and writes the run directory: config.json, history.csv,
// model.json, gates.csv, metrics.json (+ grid_table.csv when a grid ran).
void run_train_config(const CliConfig& cfg, std::ostream& log);

// Full CLI entry point (same semantics as the installed binary).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cstg::cli
