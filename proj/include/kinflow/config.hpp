#pragma once

#include <string>
#include <vector>

#include "kinflow/data.hpp"
#include "kinflow/evaluation.hpp"
#include "kinflow/flow.hpp"
#include "kinflow/training.hpp"

namespace kinflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One resolved run configuration. Every tunable of the toolkit lives here;
// parse_config starts from the documented defaults, applies a key-value
// config file, then dotted-key overrides (last one wins).
struct RunConfig {
  struct SkeletonCfg {
    std::string file;  // empty: built-in default humanoid
  } skeleton;

  struct DataCfg {
    int n_train = 20000;
    int n_val = 2000;
    int n_test = 2000;
    std::uint64_t seed = 42;
  } data;

  NoiseConfig noise;

  struct ModelCfg {
    ModelKind kind = ModelKind::one_stage;
    int z_dim = 32;
    int z_swing_dim = 32;
    int blocks = 8;
    int hidden = 128;
    std::uint64_t perm_seed = 7;
    std::uint64_t init_seed = 1;
    int mlp_hidden = 512;
    int mlp_layers = 3;
  } model;

  TrainConfig training;

  struct EvalCfg {
    std::vector<double> sweep_sigmas_mm = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    int sweep_samples = 200;
    std::uint64_t sweep_seed = 7;
  } eval;

  int threads = 1;

  KinematicTree load_tree() const;
  ModelDims model_dims() const;
  SweepConfig sweep_config() const;

  // Canonical echo: every key, documented order, round-trips through
  // parse_config.
  std::string echo() const;
};

// `overrides` are "dotted.key=value" strings (CLI form). Empty path means
// defaults only. Unknown keys, type errors and constraint violations throw
// ConfigError naming the key.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// All recognized keys with their defaults and one-line help.
std::string config_reference();

}  // namespace kinflow
