#include "kinflow/kinematics.hpp"

#include <stdexcept>

#include <Eigen/Dense>

namespace kinflow {

Eigen::VectorXd flatten_rot6d(const PoseRotations& rotations) {
  Eigen::VectorXd flat(6 * static_cast<Eigen::Index>(rotations.size()));
  for (std::size_t j = 0; j < rotations.size(); ++j)
    flat.segment<6>(6 * static_cast<Eigen::Index>(j)) = matrix_to_rot6d(rotations[j]);
  return flat;
}

PoseRotations unflatten_rot6d(const Eigen::VectorXd& flat) {
  if (flat.size() % 6 != 0) throw std::invalid_argument("unflatten_rot6d: size not 6K");
  PoseRotations out(static_cast<std::size_t>(flat.size() / 6));
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = rot6d_to_matrix(flat.segment<6>(6 * static_cast<Eigen::Index>(j)));
  return out;
}

Eigen::VectorXd fk_positions(const KinematicTree& tree, const PoseRotations& rotations,
                             const Eigen::VectorXd& beta) {
  const int K = tree.joint_count();
  if (static_cast<int>(rotations.size()) != K)
    throw std::invalid_argument("fk_positions: rotation count mismatch");
  const Eigen::VectorXd lengths = bone_lengths_from_beta(tree, beta);
  Eigen::VectorXd positions = Eigen::VectorXd::Zero(3 * K);
  std::vector<Mat3> global(static_cast<std::size_t>(K));
  global[0] = rotations[0];
  for (int j = 1; j < K; ++j) {
    const int par = tree.parent[static_cast<std::size_t>(j)];
    const Vec3 bone = lengths(j - 1) * tree.rest_dirs.col(j - 1);
    positions.segment<3>(3 * j) =
        positions.segment<3>(3 * par) + global[static_cast<std::size_t>(par)] * bone;
    global[static_cast<std::size_t>(j)] =
        global[static_cast<std::size_t>(par)] * rotations[static_cast<std::size_t>(j)];
  }
  return positions;
}

std::vector<TwistAngle> decompose_twists(const KinematicTree& tree, const PoseRotations& r) {
  std::vector<TwistAngle> out;
  for (int j = 1; j < tree.joint_count(); ++j)
    out.push_back(twist_swing_decompose(r[static_cast<std::size_t>(j)], tree.twist_axis(j)).twist);
  return out;
}

PoseRotations swing_parts(const KinematicTree& tree, const PoseRotations& r) {
  PoseRotations out(r.size());
  out[0] = r[0];
  for (int j = 1; j < tree.joint_count(); ++j)
    out[static_cast<std::size_t>(j)] =
        twist_swing_decompose(r[static_cast<std::size_t>(j)], tree.twist_axis(j)).swing;
  return out;
}

PoseRotations compose_pose(const KinematicTree& tree, const PoseRotations& swings,
                           const std::vector<TwistAngle>& twists) {
  const int K = tree.joint_count();
  if (static_cast<int>(swings.size()) != K || static_cast<int>(twists.size()) != K - 1)
    throw std::invalid_argument("compose_pose: size mismatch");
  PoseRotations out(swings.size());
  out[0] = swings[0];
  for (int j = 1; j < K; ++j)
    out[static_cast<std::size_t>(j)] = twist_swing_compose(
        swings[static_cast<std::size_t>(j)], twists[static_cast<std::size_t>(j - 1)],
        tree.twist_axis(j));
  return out;
}

PoseRotations analytic_ik(const KinematicTree& tree, const Eigen::VectorXd& positions,
                          const std::vector<TwistAngle>& twists, const Eigen::VectorXd& beta,
                          bool* degenerate_flag) {
  const int K = tree.joint_count();
  if (positions.size() != 3 * K) throw std::invalid_argument("analytic_ik: position dim mismatch");
  if (static_cast<int>(twists.size()) != K - 1)
    throw std::invalid_argument("analytic_ik: twist count mismatch");
  (void)bone_lengths_from_beta(tree, beta);  // validates beta range
  if (degenerate_flag) *degenerate_flag = false;

  auto observed_dir = [&](int child) {
    const int par = tree.parent[static_cast<std::size_t>(child)];
    const Vec3 d = positions.segment<3>(3 * child) - positions.segment<3>(3 * par);
    const double n = d.norm();
    if (n < 1e-6) throw std::invalid_argument("analytic_ik: zero-length observed bone");
    return Vec3(d / n);
  };

  PoseRotations out(static_cast<std::size_t>(K));
  std::vector<Mat3> global(static_cast<std::size_t>(K));

  // Root: orthogonal Procrustes over children directions, rest vs observed.
  {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (int c : tree.children(0)) M += observed_dir(c) * tree.rest_dirs.col(c - 1).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // Two near-zero singular values mean the directions only pin one axis.
    if (svd.singularValues()(1) < 1e-9) {
      if (degenerate_flag) *degenerate_flag = true;
      const int c = tree.children(0).front();
      out[0] = min_rotation_between(tree.rest_dirs.col(c - 1), observed_dir(c));
    } else {
      const double det = (svd.matrixU() * svd.matrixV().transpose()).determinant();
      Mat3 fix = Mat3::Identity();
      fix(2, 2) = det < 0.0 ? -1.0 : 1.0;
      out[0] = svd.matrixU() * fix * svd.matrixV().transpose();
    }
    global[0] = out[0];
  }

  for (int j = 1; j < K; ++j) {
    const int par = tree.parent[static_cast<std::size_t>(j)];
    const Vec3 axis = tree.twist_axis(j);
    Mat3 swing = Mat3::Identity();
    if (!tree.is_leaf(j)) {
      const int c = tree.children(j).front();
      const Vec3 target = (global[static_cast<std::size_t>(par)].transpose() * observed_dir(c)).normalized();
      swing = min_rotation_between(axis, target);
    }
    out[static_cast<std::size_t>(j)] =
        twist_swing_compose(swing, twists[static_cast<std::size_t>(j - 1)], axis);
    global[static_cast<std::size_t>(j)] =
        global[static_cast<std::size_t>(par)] * out[static_cast<std::size_t>(j)];
  }
  return out;
}

ad::Mat bone_vectors(const KinematicTree& tree, const ad::Mat& betas) {
  const int K = tree.joint_count();
  ad::Mat out(betas.rows(), 3 * (K - 1));
  for (Eigen::Index i = 0; i < betas.rows(); ++i) {
    const Eigen::VectorXd lengths = bone_lengths_from_beta(tree, betas.row(i).transpose());
    for (int b = 0; b < K - 1; ++b)
      out.row(i).segment<3>(3 * b) = (lengths(b) * tree.rest_dirs.col(b)).transpose();
  }
  return out;
}

namespace {

// row-major 3x3 layout used by mat3_* ops, from stacked [c1, c2, c3]
const std::vector<int> kColumnsToRowMajor = {0, 3, 6, 1, 4, 7, 2, 5, 8};

ad::Var rot6d_to_mat9(ad::Var r6) {
  using namespace ad;
  Var a1 = slice_cols(r6, 0, 3);
  Var a2 = slice_cols(r6, 3, 3);
  Var c1 = normalize_rows(a1);  // throws on a degenerate first column
  Var d = rowwise_dot(c1, a2);
  Var c2 = normalize_rows(sub(a2, mul_colvec(c1, d)));
  Var c3 = cross3(c1, c2);
  return permute_cols(hcat({c1, c2, c3}), kColumnsToRowMajor);
}

}  // namespace

ad::Var fk_positions_tape(ad::Tape& tape, const KinematicTree& tree, ad::Var rot6d,
                          const ad::Mat& bone_vecs) {
  using namespace ad;
  const int K = tree.joint_count();
  if (rot6d.cols() != 6 * K) throw std::invalid_argument("fk_positions_tape: need n x 6K");
  if (bone_vecs.cols() != 3 * (K - 1) || bone_vecs.rows() != rot6d.rows())
    throw std::invalid_argument("fk_positions_tape: bone vector shape mismatch");
  std::vector<Var> global(static_cast<std::size_t>(K));
  std::vector<Var> pos(static_cast<std::size_t>(K));
  pos[0] = tape.constant(Mat::Zero(rot6d.rows(), 3));
  global[0] = rot6d_to_mat9(slice_cols(rot6d, 0, 6));
  for (int j = 1; j < K; ++j) {
    const int par = tree.parent[static_cast<std::size_t>(j)];
    Var bone = tape.constant(bone_vecs.middleCols(3 * (j - 1), 3));
    pos[static_cast<std::size_t>(j)] =
        add(pos[static_cast<std::size_t>(par)], mat3_vec(global[static_cast<std::size_t>(par)], bone));
    global[static_cast<std::size_t>(j)] = mat3_mul(
        global[static_cast<std::size_t>(par)], rot6d_to_mat9(slice_cols(rot6d, 6 * j, 6)));
  }
  return hcat(pos);
}

ad::Mat fk_positions_batch(const KinematicTree& tree, const ad::Mat& rot6d,
                           const ad::Mat& betas) {
  const int K = tree.joint_count();
  if (rot6d.cols() != 6 * K || rot6d.rows() != betas.rows())
    throw std::invalid_argument("fk_positions_batch: shape mismatch");
  ad::Mat out(rot6d.rows(), 3 * K);
  for (Eigen::Index i = 0; i < rot6d.rows(); ++i) {
    const PoseRotations r = unflatten_rot6d(rot6d.row(i).transpose());
    out.row(i) = fk_positions(tree, r, betas.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace kinflow
