#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "kinflow/evaluation.hpp"
#include "kinflow/training.hpp"

using namespace kinflow;
using ad::Mat;

namespace {

// Brute-force similarity-Procrustes oracle, written directly from the
// centered-SVD derivation and sharing no code with pa_mpjpe_mm. Also
// reports the residual sum of squares, the quantity Procrustes optimizes.
struct PaOracle {
  double mean_mm;
  double sumsq_m2;
};
PaOracle pa_oracle(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt) {
  const Eigen::Index K = pred.size() / 3;
  Eigen::Matrix3Xd X(3, K), Y(3, K);
  for (Eigen::Index j = 0; j < K; ++j) {
    X.col(j) = pred.segment<3>(3 * j);
    Y.col(j) = gt.segment<3>(3 * j);
  }
  const Eigen::Vector3d mx = X.rowwise().mean();
  const Eigen::Vector3d my = Y.rowwise().mean();
  Eigen::Matrix3Xd Xc = X.colwise() - mx;
  Eigen::Matrix3Xd Yc = Y.colwise() - my;
  const Eigen::Matrix3d S = Yc * Xc.transpose() / static_cast<double>(K);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) D(2, 2) = -1;
  const Eigen::Matrix3d R = svd.matrixU() * D * svd.matrixV().transpose();
  const double var_x = Xc.colwise().squaredNorm().sum() / static_cast<double>(K);
  const double scale = (svd.singularValues().asDiagonal() * D).trace() / var_x;
  const Eigen::Vector3d t = my - scale * R * mx;
  double sum = 0, sumsq = 0;
  for (Eigen::Index j = 0; j < K; ++j) {
    const double d = (scale * R * X.col(j) + t - Y.col(j)).norm();
    sum += d;
    sumsq += d * d;
  }
  return {1000.0 * sum / static_cast<double>(K), sumsq};
}

// Independent per-joint mean-distance oracle for mpjpe.
double mpjpe_oracle_mm(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt) {
  double sum = 0;
  int k = 0;
  for (Eigen::Index at = 0; at + 2 < pred.size(); at += 3) {
    double d2 = 0;
    for (int c = 0; c < 3; ++c) d2 += (pred(at + c) - gt(at + c)) * (pred(at + c) - gt(at + c));
    sum += std::sqrt(d2);
    ++k;
  }
  return 1000.0 * sum / k;
}

Eigen::VectorXd random_pose_positions(const KinematicTree& tree, Rng& rng) {
  const GtPose gt = sample_gt_pose(tree, rng);
  return fk_positions(tree, gt.rotations, gt.beta);
}

}  // namespace

TEST_CASE("mpjpe unit cases") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(48);
  CHECK(mpjpe_mm(p, p) == 0.0);
  Eigen::VectorXd q = p;
  q(3 * 5 + 0) += 0.010;  // one joint 10 mm off, K = 16
  CHECK(mpjpe_mm(q, p) == doctest::Approx(0.625).epsilon(1e-12));
  CHECK_THROWS_AS(mpjpe_mm(p, Eigen::VectorXd::Zero(12)), std::invalid_argument);
}

TEST_CASE("root alignment removes a uniform offset") {
  Rng rng(1);
  KinematicTree tree = KinematicTree::default_humanoid();
  Eigen::VectorXd p = random_pose_positions(tree, rng);
  Eigen::VectorXd shifted = p;
  for (int j = 0; j < 16; ++j) shifted.segment<3>(3 * j) += Vec3(0.01, -0.02, 0.005);
  CHECK(mpjpe_mm(root_align(shifted), root_align(p)) < 1e-9);
}

TEST_CASE("pa-mpjpe removes similarity transforms exactly") {
  Rng rng(2);
  KinematicTree tree = KinematicTree::default_humanoid();
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd p = random_pose_positions(tree, rng);
    const Mat3 R = rotation_about(rng.normal_vector(3).normalized(), rng.uniform(-M_PI, M_PI));
    const double s = rng.uniform(0.5, 2.0);
    const Vec3 t = rng.normal_vector(3);
    Eigen::VectorXd moved(48);
    for (int j = 0; j < 16; ++j) moved.segment<3>(3 * j) = s * R * p.segment<3>(3 * j) + t;
    CHECK(pa_mpjpe_mm(moved, p) < 1e-9);
    CHECK(pa_mpjpe_mm(p, p) < 1e-12);
  }
}

TEST_CASE("metrics match their brute-force oracles on random pairs") {
  Rng rng(3);
  KinematicTree tree = KinematicTree::default_humanoid();
  double agg_pa = 0, agg_mpjpe = 0;
  int violations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::VectorXd a = random_pose_positions(tree, rng);
    Eigen::VectorXd b;
    if (trial % 2 == 0) {
      b = random_pose_positions(tree, rng);  // independent pose
    } else {
      b = a;  // noised copy
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += 0.03 * rng.normal();
    }
    CHECK(mpjpe_mm(a, b) == doctest::Approx(mpjpe_oracle_mm(a, b)).epsilon(1e-9));
    const double pa = pa_mpjpe_mm(a, b);
    const PaOracle oracle = pa_oracle(a, b);
    CHECK(pa == doctest::Approx(oracle.mean_mm).epsilon(1e-9));

    // Procrustes optimality is a sum-of-squares statement: root alignment
    // is inside the similarity search space, so the aligned residual
    // energy can never exceed the root-aligned one. The mean-of-norms
    // comparison below it holds in aggregate but admits rare per-sample
    // inversions (the alignment redistributes error across joints).
    const Eigen::VectorXd ra = root_align(a), rb = root_align(b);
    double rootaligned_sumsq = 0;
    for (int j = 0; j < 16; ++j)
      rootaligned_sumsq += (ra.segment<3>(3 * j) - rb.segment<3>(3 * j)).squaredNorm();
    CHECK(oracle.sumsq_m2 <= rootaligned_sumsq + 1e-9);

    const double m = mpjpe_mm(ra, rb);
    agg_pa += pa;
    agg_mpjpe += m;
    if (pa > m + 1e-9) ++violations;
  }
  CHECK(agg_pa < agg_mpjpe);          // aggregate PA-MPJPE <= MPJPE
  CHECK(violations < 2000 / 100);     // per-sample inversions stay rare
}

TEST_CASE("rot geodesic unit cases and left-invariance") {
  Rng rng(4);
  Eigen::VectorXd r1(6), r2(6);
  const Mat3 a = rotation_about(Vec3::UnitZ(), 0.0);
  const Mat3 b = rotation_about(Vec3::UnitX(), M_PI / 2);
  r1 = matrix_to_rot6d(a);
  r2 = matrix_to_rot6d(b);
  CHECK(rot_geodesic_deg(r1, r1) == doctest::Approx(0.0));
  CHECK(rot_geodesic_deg(r1, r2) == doctest::Approx(90.0).epsilon(1e-9));

  const Mat3 q = rotation_about(rng.normal_vector(3).normalized(), 1.1);
  Eigen::VectorXd qr1 = matrix_to_rot6d(q * a), qr2 = matrix_to_rot6d(q * b);
  CHECK(rot_geodesic_deg(qr1, qr2) == doctest::Approx(rot_geodesic_deg(r1, r2)).epsilon(1e-9));
}

TEST_CASE("metrics are invariant to consistent joint permutations") {
  Rng rng(5);
  KinematicTree tree = KinematicTree::default_humanoid();
  const Eigen::VectorXd a = random_pose_positions(tree, rng);
  const Eigen::VectorXd b = random_pose_positions(tree, rng);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Eigen::VectorXd pa(48), pb(48);
  for (int j = 0; j < 16; ++j) {
    pa.segment<3>(3 * j) = a.segment<3>(3 * perm[static_cast<std::size_t>(j)]);
    pb.segment<3>(3 * j) = b.segment<3>(3 * perm[static_cast<std::size_t>(j)]);
  }
  CHECK(mpjpe_mm(pa, pb) == doctest::Approx(mpjpe_mm(a, b)).epsilon(1e-12));
  CHECK(pa_mpjpe_mm(pa, pb) == doctest::Approx(pa_mpjpe_mm(a, b)).epsilon(1e-9));
}

TEST_CASE("analytic solver is exact at zero noise in the sweep") {
  KinematicTree tree = KinematicTree::default_humanoid();
  AnalyticSolver analytic;
  SweepConfig config;
  config.sigmas_m = {0.0, 0.02, 0.04};
  config.samples_per_level = 40;
  NoiseConfig conf_model;
  const auto rows = noise_sweep({&analytic}, tree, config, conf_model);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].sigma_mm == 0.0);
  CHECK(rows[0].mpjpe_mm < 0.1);
  CHECK(rows[0].pa_mpjpe_mm < 0.1);
  // error grows with noise for the analytic solver
  CHECK(rows[1].mpjpe_mm > rows[0].mpjpe_mm);
  CHECK(rows[2].mpjpe_mm > rows[1].mpjpe_mm);
  CHECK(rows[2].rot_deg > rows[1].rot_deg);
}

TEST_CASE("sweep is deterministic and solver-order independent") {
  KinematicTree tree = KinematicTree::default_humanoid();
  AnalyticSolver analytic;
  MlpSolver mlp(make_mlp_baseline(tree, 16, 2, 3));
  SweepConfig config;
  config.sigmas_m = {0.01, 0.05};
  config.samples_per_level = 20;
  NoiseConfig conf_model;
  const auto ab = noise_sweep({&analytic, &mlp}, tree, config, conf_model);
  const auto ba = noise_sweep({&mlp, &analytic}, tree, config, conf_model);
  auto find = [](const std::vector<SweepRow>& rows, const std::string& solver, double sigma) {
    for (const auto& r : rows)
      if (r.solver == solver && r.sigma_mm == sigma) return r.mpjpe_mm;
    return -1.0;
  };
  for (double sigma : {10.0, 50.0}) {
    CHECK(find(ab, "analytic", sigma) == find(ba, "analytic", sigma));
    CHECK(find(ab, "mlp", sigma) == find(ba, "mlp", sigma));
  }
  const std::string csv = sweep_csv(ab);
  CHECK(csv.find("solver,sigma_mm,mpjpe_mm,pa_mpjpe_mm,rot_deg") == 0);
  CHECK(csv.find("analytic,10.000000") != std::string::npos);
}

TEST_CASE("evaluate_solver aggregates and splits by occlusion") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;  // default: 0.3 occlusion, hot occluded noise
  Dataset data = generate_dataset(tree, noise, 17, 64);
  AnalyticSolver analytic;
  const MetricReport r = evaluate_solver(analytic, tree, data);
  CHECK(r.samples == 64);
  CHECK(r.occluded_joints + r.visible_joints == 64L * 16L);
  CHECK(std::isfinite(r.mpjpe_mm));
  CHECK(r.pa_mpjpe_mm <= r.mpjpe_mm + 1e-9);
  // occluded joints carry far larger noise, so their split error is larger
  CHECK(r.occluded_mpjpe_mm > r.visible_mpjpe_mm);
  const std::string json = r.to_json();
  CHECK(json.find("\"mpjpe_mm\"") != std::string::npos);
}
