#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <Eigen/Dense>

#include "kinflow/kinematics.hpp"
#include "kinflow/rng.hpp"

using namespace kinflow;
using ad::Mat;

namespace {

Mat3 random_rotation(Rng& rng) {
  // axis-angle from a random unit axis
  Vec3 axis = rng.normal_vector(3);
  while (axis.norm() < 1e-6) axis = rng.normal_vector(3);
  axis.normalize();
  return rotation_about(axis, rng.uniform(-M_PI, M_PI));
}

PoseRotations random_pose(const KinematicTree& tree, Rng& rng) {
  PoseRotations r;
  for (int j = 0; j < tree.joint_count(); ++j) r.push_back(random_rotation(rng));
  return r;
}

// Independent FK oracle: computes each joint position by walking up to the
// root, accumulating the chain product from scratch every time. Shares no
// code with fk_positions.
Vec3 naive_joint_position(const KinematicTree& tree, const PoseRotations& rot,
                          const Eigen::VectorXd& lengths, int joint) {
  if (joint == 0) return Vec3::Zero();
  // chain root..parent(joint)
  std::vector<int> chain;
  for (int a = tree.parent[static_cast<std::size_t>(joint)];; a = tree.parent[static_cast<std::size_t>(a)]) {
    chain.push_back(a);
    if (a == 0) break;
  }
  Mat3 global = Mat3::Identity();
  for (auto it = chain.rbegin(); it != chain.rend(); ++it)
    global = global * rot[static_cast<std::size_t>(*it)];
  return naive_joint_position(tree, rot, lengths, tree.parent[static_cast<std::size_t>(joint)]) +
         global * (lengths(joint - 1) * tree.rest_dirs.col(joint - 1));
}

}  // namespace

TEST_CASE("6D codec round trips and normalizes") {
  Vec6 ident;
  ident << 1, 0, 0, 0, 1, 0;
  CHECK(rot6d_to_matrix(ident).isIdentity(1e-15));
  CHECK(rot6d_to_matrix(2.0 * ident).isIdentity(1e-15));  // scale invariance

  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 m = random_rotation(rng);
    const Mat3 back = rot6d_to_matrix(matrix_to_rot6d(m));
    CHECK((back - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(back.determinant() - 1.0) < 1e-12);
    CHECK((back * back.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("6D codec rejects degenerate inputs") {
  Vec6 zero_first = Vec6::Zero();
  zero_first.tail<3>() << 0, 1, 0;
  CHECK_THROWS_AS(rot6d_to_matrix(zero_first), std::invalid_argument);
  Vec6 parallel;
  parallel << 1, 0, 0, 2, 0, 0;
  CHECK_THROWS_AS(rot6d_to_matrix(parallel), std::invalid_argument);
}

TEST_CASE("twist-swing decompose hits the documented special cases") {
  const Vec3 axis = Vec3::UnitZ();
  // pure twist about the axis
  const double t = 0.83;
  auto ts = twist_swing_decompose(rotation_about(axis, t), axis);
  CHECK(ts.swing.isIdentity(1e-12));
  CHECK(ts.twist.c == doctest::Approx(std::cos(t)).epsilon(1e-12));
  CHECK(ts.twist.s == doctest::Approx(std::sin(t)).epsilon(1e-12));

  // pure swing: 90 degrees about a perpendicular vector
  const Mat3 r = rotation_about(Vec3::UnitX(), M_PI / 2);
  auto ts2 = twist_swing_decompose(r, axis);
  CHECK(ts2.twist.c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ts2.twist.s == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((ts2.swing - r).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("twist-swing round trip on 10^4 random cases") {
  Rng rng(2);
  double worst = 0.0;
  int rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3 r = random_rotation(rng);
    Vec3 axis = rng.normal_vector(3);
    while (axis.norm() < 1e-6) axis = rng.normal_vector(3);
    axis.normalize();
    if (axis.dot(r * axis) < -1.0 + 1e-5) {  // rejected by contract
      CHECK_THROWS_AS(twist_swing_decompose(r, axis), std::invalid_argument);
      ++rejected;
      continue;
    }
    const auto ts = twist_swing_decompose(r, axis);
    CHECK(std::abs(ts.twist.c * ts.twist.c + ts.twist.s * ts.twist.s - 1.0) < 1e-9);
    const Mat3 back = twist_swing_compose(ts.swing, ts.twist, axis);
    worst = std::max(worst, (back - r).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK(rejected < 10);  // the excluded cap is tiny
}

TEST_CASE("twist-swing error and normalization paths") {
  const Vec3 axis = Vec3::UnitZ();
  const Mat3 flip = rotation_about(Vec3::UnitX(), M_PI);  // sends z to -z
  CHECK_THROWS_AS(twist_swing_decompose(flip, axis), std::invalid_argument);

  const long before = rotation_warning_count();
  const Mat3 r = twist_swing_compose(Mat3::Identity(), {2.0, 0.0}, axis);
  CHECK(r.isIdentity(1e-12));  // (2,0) normalized to (1,0)
  CHECK(rotation_warning_count() > before);

  // identity swing and unit twist give exactly the axis rotation
  const double t = -1.2;
  const Mat3 rt = twist_swing_compose(Mat3::Identity(), {std::cos(t), std::sin(t)}, axis);
  CHECK((rt - rotation_about(axis, t)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("default humanoid tree is sane and hashes stably") {
  KinematicTree tree = KinematicTree::default_humanoid();
  CHECK(tree.joint_count() == 16);
  CHECK(tree.beta_dim() == 10);
  tree.validate();
  CHECK(tree.hash() == KinematicTree::default_humanoid().hash());

  // skeleton file round trip
  const std::string path = (std::filesystem::temp_directory_path() / "kf_tree.json").string();
  save_skeleton(path, tree);
  KinematicTree loaded = load_skeleton(path);
  CHECK(loaded.hash() == tree.hash());
  std::filesystem::remove(path);
}

TEST_CASE("bone lengths: base at beta=0, positive over the sampled range") {
  KinematicTree tree = KinematicTree::default_humanoid();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(10);
  CHECK((bone_lengths_from_beta(tree, zero) - tree.base_lengths).cwiseAbs().maxCoeff() == 0.0);

  KinematicTree flat = tree;
  flat.beta_map.setZero();
  flat.finalize();
  Rng rng(3);
  CHECK((bone_lengths_from_beta(flat, rng.uniform_vector(10, -1, 1)) - flat.base_lengths)
            .cwiseAbs()
            .maxCoeff() == 0.0);

  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
    const Eigen::VectorXd lengths = bone_lengths_from_beta(tree, beta);
    CHECK(lengths.minCoeff() > 0.05);
    CHECK(lengths.maxCoeff() < 0.8);
  }

  CHECK_THROWS_AS(bone_lengths_from_beta(tree, Eigen::VectorXd::Constant(10, 1e6)),
                  std::invalid_argument);
}

TEST_CASE("fk at identity reproduces the rest pose") {
  KinematicTree tree = KinematicTree::default_humanoid();
  PoseRotations ident(16, Mat3::Identity());
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
  const Eigen::VectorXd pos = fk_positions(tree, ident, beta);
  CHECK(pos.segment<3>(0).norm() == 0.0);
  for (int j = 1; j < 16; ++j) {
    const Vec3 expect = pos.segment<3>(3 * tree.parent[static_cast<std::size_t>(j)]) +
                        tree.base_lengths(j - 1) * tree.rest_dirs.col(j - 1);
    CHECK((pos.segment<3>(3 * j) - expect).norm() < 1e-15);
  }
}

TEST_CASE("fk equivariance under a root rotation") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(4);
  PoseRotations pose = random_pose(tree, rng);
  const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
  const Eigen::VectorXd base = fk_positions(tree, pose, beta);
  const Mat3 q = random_rotation(rng);
  PoseRotations rotated = pose;
  rotated[0] = q * pose[0];
  const Eigen::VectorXd moved = fk_positions(tree, rotated, beta);
  for (int j = 0; j < 16; ++j)
    CHECK((moved.segment<3>(3 * j) - q * base.segment<3>(3 * j)).norm() < 1e-12);
}

TEST_CASE("fk matches the independent naive recursion within 1e-12") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    PoseRotations pose = random_pose(tree, rng);
    const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
    const Eigen::VectorXd lengths = bone_lengths_from_beta(tree, beta);
    const Eigen::VectorXd pos = fk_positions(tree, pose, beta);
    for (int j = 0; j < 16; ++j)
      CHECK((pos.segment<3>(3 * j) - naive_joint_position(tree, pose, lengths, j)).norm() <
            1e-12);
  }
}

TEST_CASE("leaf rotations do not move any joint") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(6);
  PoseRotations pose = random_pose(tree, rng);
  const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
  const Eigen::VectorXd base = fk_positions(tree, pose, beta);
  for (int j = 1; j < 16; ++j) {
    if (!tree.is_leaf(j)) continue;
    PoseRotations tweaked = pose;
    tweaked[static_cast<std::size_t>(j)] = random_rotation(rng);
    CHECK((fk_positions(tree, tweaked, beta) - base).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("tape fk equals plain fk within 1e-12") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(7);
  const int n = 8;
  Mat rot6d(n, 96), betas(n, 10);
  for (int i = 0; i < n; ++i) {
    betas.row(i) = rng.uniform_vector(10, -1, 1).transpose();
    rot6d.row(i) = flatten_rot6d(random_pose(tree, rng)).transpose();
  }
  ad::Tape tape;
  ad::Var out = fk_positions_tape(tape, tree, tape.constant(rot6d), bone_vectors(tree, betas));
  const Mat plain = fk_positions_batch(tree, rot6d, betas);
  CHECK((out.value() - plain).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic ik recovers the pose from clean fk") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    PoseRotations pose = random_pose(tree, rng);
    // leaf swings are unobservable from positions; analytic IK restores
    // twist only, so build GT poses with twist-only leaves
    for (int j = 1; j < 16; ++j)
      if (tree.is_leaf(j)) {
        const auto ts = twist_swing_decompose(pose[static_cast<std::size_t>(j)], tree.twist_axis(j));
        pose[static_cast<std::size_t>(j)] =
            rotation_about(tree.twist_axis(j), std::atan2(ts.twist.s, ts.twist.c));
      }
    const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
    const Eigen::VectorXd pos = fk_positions(tree, pose, beta);
    const auto twists = decompose_twists(tree, pose);
    bool degenerate = false;
    const PoseRotations rec = analytic_ik(tree, pos, twists, beta, &degenerate);
    CHECK_FALSE(degenerate);
    for (int j = 0; j < 16; ++j)
      CHECK((rec[static_cast<std::size_t>(j)] - pose[static_cast<std::size_t>(j)])
                .cwiseAbs()
                .maxCoeff() < 1e-9);
  }
}

TEST_CASE("fk-ik-fk idempotence on clean inputs") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    PoseRotations pose = random_pose(tree, rng);
    const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
    const Eigen::VectorXd pos = fk_positions(tree, pose, beta);
    const PoseRotations rec = analytic_ik(tree, pos, decompose_twists(tree, pose), beta);
    CHECK((fk_positions(tree, rec, beta) - pos).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("analytic ik on the rest pose with zero twists is identity") {
  KinematicTree tree = KinematicTree::default_humanoid();
  PoseRotations ident(16, Mat3::Identity());
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
  const Eigen::VectorXd pos = fk_positions(tree, ident, beta);
  std::vector<TwistAngle> zero_twists(15);
  const PoseRotations rec = analytic_ik(tree, pos, zero_twists, beta);
  for (const auto& r : rec) CHECK(r.isIdentity(1e-12));
}

TEST_CASE("analytic ik under position noise fits noisy bones, degrades rotations") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(10);
  double clean_err = 0.0, noisy_err = 0.0;
  int n = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PoseRotations pose = random_pose(tree, rng);
    const Eigen::VectorXd beta = rng.uniform_vector(10, -1, 1);
    const Eigen::VectorXd pos = fk_positions(tree, pose, beta);
    Eigen::VectorXd noisy = pos;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += 0.05 * rng.normal();
    const auto twists = decompose_twists(tree, pose);
    const PoseRotations rec_clean = analytic_ik(tree, pos, twists, beta);
    const PoseRotations rec_noisy = analytic_ik(tree, noisy, twists, beta);

    // each solved joint aligns its first child bone to the observation
    // exactly (branching joints cannot also fit their other children, and
    // the Procrustes root is a least-squares fit)
    const Eigen::VectorXd refit = fk_positions(tree, rec_noisy, beta);
    for (int j = 1; j < 16; ++j) {
      if (tree.is_leaf(j)) continue;
      const int c = tree.children(j).front();
      const Vec3 want = (noisy.segment<3>(3 * c) - noisy.segment<3>(3 * j)).normalized();
      const Vec3 got = (refit.segment<3>(3 * c) - refit.segment<3>(3 * j)).normalized();
      CHECK((want - got).norm() < 1e-9);
    }
    for (int j = 0; j < 16; ++j) {
      if (tree.is_leaf(j)) continue;  // leaf swing is unobservable for both
      clean_err += geodesic_deg(rec_clean[static_cast<std::size_t>(j)], pose[static_cast<std::size_t>(j)]);
      noisy_err += geodesic_deg(rec_noisy[static_cast<std::size_t>(j)], pose[static_cast<std::size_t>(j)]);
      ++n;
    }
  }
  CHECK(noisy_err / n > clean_err / n);
  CHECK(clean_err / n < 1.0);  // clean recovery is near-exact outside leaf swings
}

TEST_CASE("analytic ik error paths") {
  KinematicTree tree = KinematicTree::default_humanoid();
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
  PoseRotations ident(16, Mat3::Identity());
  Eigen::VectorXd pos = fk_positions(tree, ident, beta);
  pos.segment<3>(3) = pos.segment<3>(0);  // child collapses onto parent
  std::vector<TwistAngle> twists(15);
  CHECK_THROWS_AS(analytic_ik(tree, pos, twists, beta), std::invalid_argument);
}

TEST_CASE("swing extraction is consistent with compose") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(11);
  PoseRotations pose = random_pose(tree, rng);
  const PoseRotations swings = swing_parts(tree, pose);
  const auto twists = decompose_twists(tree, pose);
  const PoseRotations back = compose_pose(tree, swings, twists);
  for (int j = 0; j < 16; ++j)
    CHECK((back[static_cast<std::size_t>(j)] - pose[static_cast<std::size_t>(j)])
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}
