#pragma once

#include <string>

#include "ddlab/config.hpp"

namespace ddlab {

inline constexpr const char* kVersion = "0.1.0";

// Subcommand bodies. Each writes its artifacts plus a manifest_<name>.json
// into cfg.out_dir; none of the outputs embed timestamps, so a rerun with the
// same config reproduces every file byte for byte.
void cmd_gen_data(const RunConfig& cfg);
void cmd_train_base(const RunConfig& cfg);
void cmd_distill(const RunConfig& cfg);
void cmd_train_lora(const RunConfig& cfg);
void cmd_sample(const RunConfig& cfg);
void cmd_dt_viz(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_sweep(const RunConfig& cfg);
void cmd_control_transfer(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

// Runs a subcommand by CLI name ("gen-data", "train-base", ...). Returns the
// process exit code: 0 success, 2 config error, 3 missing/corrupt artifact,
// 1 anything else. Messages go to stderr.
int run_command(const std::string& name, const RunConfig& cfg);

}  // namespace ddlab
