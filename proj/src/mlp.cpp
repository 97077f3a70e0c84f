#include "kinflow/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace kinflow {

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

void MlpParams::validate() const {
  if (weights.empty() || weights.size() != biases.size())
    throw std::invalid_argument("MlpParams: empty or mismatched layers");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (biases[i].rows() != 1 || biases[i].cols() != weights[i].cols())
      throw std::invalid_argument("MlpParams: bias shape mismatch");
    if (i + 1 < weights.size() && weights[i].cols() != weights[i + 1].rows())
      throw std::invalid_argument("MlpParams: layer dims do not chain");
  }
}

std::vector<ad::Mat*> MlpParams::param_ptrs() {
  std::vector<ad::Mat*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

MlpParams make_mlp(int in, const std::vector<int>& hidden, int out,
                   MlpParams::Output output, Rng& rng) {
  std::vector<int> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  MlpParams p;
  p.output = output;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = std::sqrt(6.0 / (dims[i] + dims[i + 1]));
    p.weights.push_back(rng.uniform_matrix(dims[i], dims[i + 1], -bound, bound));
    p.biases.push_back(ad::Mat::Zero(1, dims[i + 1]));
  }
  p.validate();
  return p;
}

ad::Mat mlp_apply(const MlpParams& params, const ad::Mat& x) {
  if (x.cols() != params.in_dim())
    throw std::invalid_argument("mlp_apply: input dim mismatch");
  ad::Mat h = x;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    h = (h * params.weights[i]).rowwise() + params.biases[i].row(0);
    if (i + 1 < params.weights.size()) {
      h = h.cwiseMax(0.0);
    } else if (params.output == MlpParams::Output::tanh) {
      h = h.array().tanh().matrix();
    }
  }
  return h;
}

MlpVars lift_mlp(ad::Tape& tape, const MlpParams& params, bool trainable) {
  MlpVars v;
  v.output = params.output;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    v.weights.push_back(trainable ? tape.param(&params.weights[i])
                                  : tape.constant_ref(&params.weights[i]));
    v.biases.push_back(trainable ? tape.param(&params.biases[i])
                                 : tape.constant_ref(&params.biases[i]));
  }
  return v;
}

ad::Var mlp_apply(const MlpVars& vars, ad::Var x) {
  if (x.cols() != vars.weights.front().rows())
    throw std::invalid_argument("mlp_apply: input dim mismatch");
  ad::Var h = x;
  for (std::size_t i = 0; i < vars.weights.size(); ++i) {
    h = ad::add_rowvec(ad::matmul(h, vars.weights[i]), vars.biases[i]);
    if (i + 1 < vars.weights.size()) {
      h = ad::relu(h);
    } else if (vars.output == MlpParams::Output::tanh) {
      h = ad::vtanh(h);
    }
  }
  return h;
}

}  // namespace kinflow
