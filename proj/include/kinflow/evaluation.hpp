#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kinflow/data.hpp"
#include "kinflow/flow.hpp"
#include "kinflow/kinematics.hpp"
#include "kinflow/mlp.hpp"

namespace kinflow {

// Positions are flat 3K vectors in meters; metrics report millimeters.
// mpjpe expects root-aligned inputs (use root_align); pa_mpjpe aligns
// internally with a similarity transform, so any frame works.
Eigen::VectorXd root_align(const Eigen::VectorXd& positions);

double mpjpe_mm(const Eigen::VectorXd& p_pred, const Eigen::VectorXd& p_gt);
double pa_mpjpe_mm(const Eigen::VectorXd& p_pred, const Eigen::VectorXd& p_gt);

// Mean geodesic angle between per-joint rotations, degrees.
double rot_geodesic_deg(const Eigen::VectorXd& rot6d_pred, const Eigen::VectorXd& rot6d_gt);

struct MetricReport {
  int samples = 0;
  double mpjpe_mm = 0;
  double pa_mpjpe_mm = 0;
  double rot_deg = 0;
  // per-joint position error split by the observation's occlusion mask
  double occluded_mpjpe_mm = 0;
  double visible_mpjpe_mm = 0;
  long occluded_joints = 0;
  long visible_joints = 0;

  std::string to_json() const;
};

// An IK solver under evaluation: batch of observations -> 6D rotations.
class IkSolver {
 public:
  virtual ~IkSolver() = default;
  virtual std::string name() const = 0;
  virtual ad::Mat solve(const KinematicTree& tree, const BatchView& batch) const = 0;
};

class AnalyticSolver final : public IkSolver {
 public:
  std::string name() const override { return "analytic"; }
  ad::Mat solve(const KinematicTree& tree, const BatchView& batch) const override;
};

class FlowSolver final : public IkSolver {
 public:
  explicit FlowSolver(std::shared_ptr<const FlowIkModel> model) : model_(std::move(model)) {}
  std::string name() const override { return "flow"; }
  ad::Mat solve(const KinematicTree& tree, const BatchView& batch) const override;
  const FlowIkModel& model() const { return *model_; }

 private:
  std::shared_ptr<const FlowIkModel> model_;
};

class MlpSolver final : public IkSolver {
 public:
  explicit MlpSolver(MlpParams params) : params_(std::move(params)) {}
  std::string name() const override { return "mlp"; }
  ad::Mat solve(const KinematicTree& tree, const BatchView& batch) const override;

 private:
  MlpParams params_;
};

// Runs a solver over a dataset and aggregates the metrics.
MetricReport evaluate_solver(const IkSolver& solver, const KinematicTree& tree,
                             const Dataset& dataset, int batch_size = 256);

struct SweepRow {
  std::string solver;
  double sigma_mm = 0;
  double mpjpe_mm = 0;
  double pa_mpjpe_mm = 0;
  double rot_deg = 0;
};

struct SweepConfig {
  std::vector<double> sigmas_m = {0.0,  0.01, 0.02, 0.03, 0.04, 0.05,
                                  0.06, 0.07, 0.08, 0.09, 0.10};
  int samples_per_level = 200;
  std::uint64_t seed = 7;
};

// Appendix-style robustness sweep: fresh GT poses per level, pure position
// noise of the given sigma on every joint, exact twists, confidences from
// the realized error law. Sample generation depends only on (tree, config),
// never on the solver list.
std::vector<SweepRow> noise_sweep(const std::vector<const IkSolver*>& solvers,
                                  const KinematicTree& tree, const SweepConfig& config,
                                  const NoiseConfig& confidence_model);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace kinflow
