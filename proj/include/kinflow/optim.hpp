#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinflow/autodiff.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction over a fixed list of parameter
// matrices. Single-writer: step() must not race with readers.
class Adam {
 public:
  Adam(std::vector<ad::Mat*> params, AdamConfig config);

  // grads[i] must match params[i] shape. Throws on NaN/Inf gradients.
  void step(const std::vector<ad::Mat>& grads);

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::int64_t steps() const { return t_; }
  const std::vector<ad::Mat*>& params() const { return params_; }

  // checkpoint access
  std::vector<ad::Mat>& moment1() { return m_; }
  std::vector<ad::Mat>& moment2() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<ad::Mat*> params_;
  std::vector<ad::Mat> m_, v_;
  AdamConfig config_;
  std::int64_t t_ = 0;
};

double global_grad_norm(const std::vector<ad::Mat>& grads);
// Scales grads in place so the global norm is at most max_norm.
void clip_global_norm(std::vector<ad::Mat>& grads, double max_norm);

struct GradCheckReport {
  bool pass = false;
  double worst_rel_err = 0.0;
  std::string worst_location;
  int components_checked = 0;
};

// Compares analytic gradients against central finite differences on a
// deterministic random subset of components (all components when
// max_components <= 0 or exceeds the parameter count). The closure is
// re-evaluated with perturbed parameters, so it must read the parameter
// values through the given pointers. Components whose FD estimate is
// polluted by a nearby kink are retried at a smaller step; a genuine
// gradient bug stays wrong under refinement.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<ad::Mat*>& params,
                           const std::vector<ad::Mat>& analytic_grads,
                           double tolerance, double step, Rng& rng,
                           int max_components = 0);

}  // namespace kinflow
