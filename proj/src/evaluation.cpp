#include "kinflow/evaluation.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace kinflow {

Eigen::VectorXd root_align(const Eigen::VectorXd& positions) {
  Eigen::VectorXd out = positions;
  const Vec3 root = positions.segment<3>(0);
  for (Eigen::Index j = 0; j < positions.size() / 3; ++j) out.segment<3>(3 * j) -= root;
  return out;
}

double mpjpe_mm(const Eigen::VectorXd& p_pred, const Eigen::VectorXd& p_gt) {
  if (p_pred.size() != p_gt.size() || p_pred.size() % 3 != 0)
    throw std::invalid_argument("mpjpe: dimension mismatch");
  const Eigen::Index K = p_pred.size() / 3;
  double sum = 0;
  for (Eigen::Index j = 0; j < K; ++j)
    sum += (p_pred.segment<3>(3 * j) - p_gt.segment<3>(3 * j)).norm();
  return 1000.0 * sum / static_cast<double>(K);
}

double pa_mpjpe_mm(const Eigen::VectorXd& p_pred, const Eigen::VectorXd& p_gt) {
  if (p_pred.size() != p_gt.size() || p_pred.size() % 3 != 0)
    throw std::invalid_argument("pa_mpjpe: dimension mismatch");
  const Eigen::Index K = p_pred.size() / 3;
  if (K < 3) throw std::invalid_argument("pa_mpjpe: need at least 3 joints");
  Eigen::Matrix3Xd src(3, K), dst(3, K);
  for (Eigen::Index j = 0; j < K; ++j) {
    src.col(j) = p_pred.segment<3>(3 * j);
    dst.col(j) = p_gt.segment<3>(3 * j);
  }
  // optimal similarity transform (rotation + translation + scale)
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  const Eigen::Matrix3d sR = T.topLeftCorner<3, 3>();
  const Vec3 t = T.topRightCorner<3, 1>();
  double sum = 0;
  for (Eigen::Index j = 0; j < K; ++j) sum += (sR * src.col(j) + t - dst.col(j)).norm();
  return 1000.0 * sum / static_cast<double>(K);
}

double rot_geodesic_deg(const Eigen::VectorXd& rot6d_pred, const Eigen::VectorXd& rot6d_gt) {
  if (rot6d_pred.size() != rot6d_gt.size() || rot6d_pred.size() % 6 != 0)
    throw std::invalid_argument("rot_geodesic: dimension mismatch");
  const Eigen::Index K = rot6d_pred.size() / 6;
  double sum = 0;
  for (Eigen::Index j = 0; j < K; ++j)
    sum += geodesic_deg(rot6d_to_matrix(rot6d_pred.segment<6>(6 * j)),
                        rot6d_to_matrix(rot6d_gt.segment<6>(6 * j)));
  return sum / static_cast<double>(K);
}

std::string MetricReport::to_json() const {
  nlohmann::json j = {{"samples", samples},
                      {"mpjpe_mm", mpjpe_mm},
                      {"pa_mpjpe_mm", pa_mpjpe_mm},
                      {"rot_deg", rot_deg},
                      {"occluded_mpjpe_mm", occluded_mpjpe_mm},
                      {"visible_mpjpe_mm", visible_mpjpe_mm},
                      {"occluded_joints", occluded_joints},
                      {"visible_joints", visible_joints}};
  return j.dump(2);
}

ad::Mat AnalyticSolver::solve(const KinematicTree& tree, const BatchView& batch) const {
  const int K = tree.joint_count();
  ad::Mat out(batch.p_obs.rows(), 6 * K);
  for (Eigen::Index i = 0; i < batch.p_obs.rows(); ++i) {
    std::vector<TwistAngle> twists;
    for (int j = 0; j < K - 1; ++j)
      twists.push_back({batch.twists_obs(i, 2 * j), batch.twists_obs(i, 2 * j + 1)});
    const PoseRotations rec = analytic_ik(tree, batch.p_obs.row(i).transpose(), twists,
                                          batch.beta.row(i).transpose());
    out.row(i) = flatten_rot6d(rec).transpose();
  }
  return out;
}

ad::Mat FlowSolver::solve(const KinematicTree&, const BatchView& batch) const {
  return model_->ik_eval(batch.p_obs, batch.twists_obs, batch.confidence, batch.beta).rot;
}

ad::Mat MlpSolver::solve(const KinematicTree&, const BatchView& batch) const {
  ad::Mat in(batch.p_obs.rows(),
             batch.p_obs.cols() + batch.twists_obs.cols() + batch.confidence.cols() +
                 batch.beta.cols());
  in << batch.p_obs, batch.twists_obs, batch.confidence, batch.beta;
  return mlp_apply(params_, in);
}

MetricReport evaluate_solver(const IkSolver& solver, const KinematicTree& tree,
                             const Dataset& dataset, int batch_size) {
  MetricReport report;
  double occ_err = 0, vis_err = 0;
  for (int begin = 0; begin < dataset.size(); begin += batch_size) {
    const int end = std::min(dataset.size(), begin + batch_size);
    std::vector<int> idx;
    for (int i = begin; i < end; ++i) idx.push_back(i);
    const BatchView batch = make_batch(tree, dataset, idx);
    const ad::Mat rot = solver.solve(tree, batch);
    for (Eigen::Index r = 0; r < rot.rows(); ++r) {
      const PoseSample& s = dataset.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
      const Eigen::VectorXd pred =
          fk_positions(tree, unflatten_rot6d(rot.row(r).transpose()), s.beta);
      const Eigen::VectorXd pa = root_align(pred);
      const Eigen::VectorXd ga = root_align(s.p_gt);
      report.mpjpe_mm += mpjpe_mm(pa, ga);
      report.pa_mpjpe_mm += pa_mpjpe_mm(pred, s.p_gt);
      report.rot_deg += rot_geodesic_deg(rot.row(r).transpose(), s.rot_gt);
      for (int j = 0; j < tree.joint_count(); ++j) {
        const double e = 1000.0 * (pa.segment<3>(3 * j) - ga.segment<3>(3 * j)).norm();
        if (s.occluded[static_cast<std::size_t>(j)]) {
          occ_err += e;
          ++report.occluded_joints;
        } else {
          vis_err += e;
          ++report.visible_joints;
        }
      }
      ++report.samples;
    }
  }
  if (report.samples > 0) {
    report.mpjpe_mm /= report.samples;
    report.pa_mpjpe_mm /= report.samples;
    report.rot_deg /= report.samples;
  }
  report.occluded_mpjpe_mm = report.occluded_joints ? occ_err / static_cast<double>(report.occluded_joints) : 0;
  report.visible_mpjpe_mm = report.visible_joints ? vis_err / static_cast<double>(report.visible_joints) : 0;
  return report;
}

std::vector<SweepRow> noise_sweep(const std::vector<const IkSolver*>& solvers,
                                  const KinematicTree& tree, const SweepConfig& config,
                                  const NoiseConfig& confidence_model) {
  std::vector<SweepRow> rows;
  for (std::size_t level = 0; level < config.sigmas_m.size(); ++level) {
    const double sigma = config.sigmas_m[level];
    // one dataset per level, shared verbatim across solvers
    NoiseConfig level_noise = confidence_model;
    level_noise.base_sigma = sigma;
    level_noise.occlusion_prob = 0.0;
    level_noise.twist_sigma = 0.0;
    level_noise.seed = config.seed + level;
    Dataset data = generate_dataset(tree, level_noise, config.seed + level,
                                    config.samples_per_level);
    for (const IkSolver* solver : solvers) {
      const MetricReport r = evaluate_solver(*solver, tree, data);
      rows.push_back({solver->name(), 1000.0 * sigma, r.mpjpe_mm, r.pa_mpjpe_mm, r.rot_deg});
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "solver,sigma_mm,mpjpe_mm,pa_mpjpe_mm,rot_deg\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const SweepRow& r : rows)
    out << r.solver << "," << r.sigma_mm << "," << r.mpjpe_mm << "," << r.pa_mpjpe_mm << ","
        << r.rot_deg << "\n";
  return out.str();
}

}  // namespace kinflow
