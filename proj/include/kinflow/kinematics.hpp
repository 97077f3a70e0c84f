#pragma once

#include <vector>

#include "kinflow/autodiff.hpp"
#include "kinflow/rotation.hpp"
#include "kinflow/skeleton.hpp"

namespace kinflow {

using PoseRotations = std::vector<Mat3>;  // one rotation per joint

Eigen::VectorXd flatten_rot6d(const PoseRotations& rotations);            // 6K
PoseRotations unflatten_rot6d(const Eigen::VectorXd& flat);               // throws on degenerate

// Forward kinematics. Root sits at the origin; a child's position is the
// parent position plus the parent's accumulated global rotation applied to
// the shape-scaled rest bone. A joint's rotation therefore moves its
// children, and leaf rotations move nothing.
Eigen::VectorXd fk_positions(const KinematicTree& tree, const PoseRotations& rotations,
                             const Eigen::VectorXd& beta);  // 3K

// Twist components of a pose about each joint's twist axis, joints 1..K-1.
std::vector<TwistAngle> decompose_twists(const KinematicTree& tree, const PoseRotations& r);

// Swing components per joint. The root swing is the full root rotation
// (positions determine it completely), every other joint keeps the minimal
// rotation taking its twist axis to the rotated axis.
PoseRotations swing_parts(const KinematicTree& tree, const PoseRotations& r);

PoseRotations compose_pose(const KinematicTree& tree, const PoseRotations& swings,
                           const std::vector<TwistAngle>& twists);

// Analytic IK. The root is solved by orthogonal Procrustes over its
// children's bone directions; every other joint aligns its rest bone to the
// observed bone in the solved parent frame and applies the given twist.
// Leaf joints are twist-only (their swing is unobservable from positions).
// If the Procrustes system is degenerate the root falls back to the minimal
// rotation on its first child and *degenerate_flag is set.
PoseRotations analytic_ik(const KinematicTree& tree, const Eigen::VectorXd& positions,
                          const std::vector<TwistAngle>& twists, const Eigen::VectorXd& beta,
                          bool* degenerate_flag = nullptr);

// ---- batched paths used by training and evaluation ----

// Per-sample shape-scaled bone vectors; rows = batch, cols = 3*(K-1).
ad::Mat bone_vectors(const KinematicTree& tree, const ad::Mat& betas);

// Differentiable batched FK on 6D rotations (n x 6K) -> positions (n x 3K).
ad::Var fk_positions_tape(ad::Tape& tape, const KinematicTree& tree, ad::Var rot6d,
                          const ad::Mat& bone_vecs);

// Plain batched FK, one row per sample.
ad::Mat fk_positions_batch(const KinematicTree& tree, const ad::Mat& rot6d,
                           const ad::Mat& betas);

}  // namespace kinflow
