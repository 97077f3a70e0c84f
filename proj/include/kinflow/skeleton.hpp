#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinflow/rotation.hpp"

namespace kinflow {

struct JointLimits {
  double swing_deg = 60.0;  // half-angle of the swing cone
  double twist_deg = 45.0;
};

// Articulated skeleton with shape-conditioned bone lengths:
// lengths(beta) = base_lengths + beta_map * beta. Joint 0 is the root;
// parents must precede children (parent[j] < j). Per-joint arrays are
// indexed by joint; bone arrays (rest_dirs, base_lengths, beta_map rows)
// are indexed by joint - 1, the bone from parent(j) to j.
struct KinematicTree {
  std::vector<std::string> names;
  std::vector<int> parent;             // parent[0] == 0
  Eigen::Matrix3Xd rest_dirs;          // 3 x (K-1), unit, in the parent frame
  Eigen::VectorXd base_lengths;        // K-1, meters
  Eigen::MatrixXd beta_map;            // (K-1) x beta_dim
  std::uint64_t beta_map_seed = 0;
  std::vector<JointLimits> limits;     // K entries (root included)

  int joint_count() const { return static_cast<int>(parent.size()); }
  int beta_dim() const { return static_cast<int>(beta_map.cols()); }
  const std::vector<int>& children(int j) const { return children_[static_cast<std::size_t>(j)]; }
  bool is_leaf(int j) const { return children(j).empty(); }

  // Twist axis of joint j: rest direction of its first child's bone, or the
  // joint's own bone for leaves. Defined for every joint (the root has
  // children by construction).
  Vec3 twist_axis(int j) const;

  void finalize();        // builds the children table, then validates
  void validate() const;  // topology, unit rest dirs, positive base lengths

  std::string canonical_json() const;
  std::uint64_t hash() const;  // FNV-1a over canonical_json()

  static KinematicTree default_humanoid();

 private:
  std::vector<std::vector<int>> children_;
};

// lengths = base + beta_map * beta; throws if any length is non-positive
// (beta outside the supported range) or beta is non-finite.
Eigen::VectorXd bone_lengths_from_beta(const KinematicTree& tree, const Eigen::VectorXd& beta);

void save_skeleton(const std::string& path, const KinematicTree& tree);
KinematicTree load_skeleton(const std::string& path);

}  // namespace kinflow
