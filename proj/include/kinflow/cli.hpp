#pragma once

#include <string>
#include <vector>

#include "kinflow/config.hpp"

namespace kinflow {

// Command implementations behind the `kinflow` binary; each returns a
// process exit code and writes its artifacts plus a resolved-config echo
// into `out_dir`. Kept callable so tests can drive them directly.

int cmd_gen_data(const RunConfig& config, const std::string& out_dir);
int cmd_train(const RunConfig& config, const std::string& data_dir, const std::string& out_dir,
              const std::string& baseline /* "" | "mlp" */, bool quiet);
int cmd_eval(const RunConfig& config, const std::string& solver,
             const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out_dir);
int cmd_sweep(const RunConfig& config, const std::vector<std::pair<std::string, std::string>>&
                                           checkpoints /* (label, path) */,
              const std::string& out_dir);
int cmd_grad_check(int components);
int cmd_inspect(const std::string& checkpoint_path);

// Full argv entry point (subcommand parsing, env-var output root).
int run_cli(int argc, char** argv);

}  // namespace kinflow
