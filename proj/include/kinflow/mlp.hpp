#pragma once

#include <vector>

#include "kinflow/autodiff.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

// Fully connected net. Weights are stored (in x out) so a batch applies as
// x * W + b. Hidden activation is ReLU; the output layer is identity or tanh.
struct MlpParams {
  enum class Output { identity, tanh };

  std::vector<ad::Mat> weights;  // layer i: (dims[i] x dims[i+1])
  std::vector<ad::Mat> biases;   // layer i: (1 x dims[i+1])
  Output output = Output::identity;

  int in_dim() const { return static_cast<int>(weights.front().rows()); }
  int out_dim() const { return static_cast<int>(weights.back().cols()); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t param_count() const;
  void validate() const;  // throws if layer dims do not chain
  std::vector<ad::Mat*> param_ptrs();
};

// Glorot-uniform weights, zero biases. `hidden` lists the hidden widths;
// the default architecture elsewhere in the project is two hidden layers
// of 512 (a 3-layer net).
MlpParams make_mlp(int in, const std::vector<int>& hidden, int out,
                   MlpParams::Output output, Rng& rng);

// Plain forward pass; pure, safe to call concurrently with frozen params.
ad::Mat mlp_apply(const MlpParams& params, const ad::Mat& x);

// Tape leaves for one pass. With trainable=false the parameters are
// constants and backward() will not touch them.
struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  MlpParams::Output output = MlpParams::Output::identity;
};

MlpVars lift_mlp(ad::Tape& tape, const MlpParams& params, bool trainable);
ad::Var mlp_apply(const MlpVars& vars, ad::Var x);

}  // namespace kinflow
