#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kinflow/kinematics.hpp"
#include "kinflow/rng.hpp"
#include "kinflow/skeleton.hpp"

namespace kinflow {

// Observation corruption model. A joint is occluded with
// `occlusion_prob`; visible joints carry the base position noise, occluded
// joints the larger sigma plus angle-space twist noise. Confidence is
// exp(-realized position error / confidence_scale), clipped to
// [confidence_floor, 1].
struct NoiseConfig {
  double base_sigma = 0.005;       // m
  double occlusion_prob = 0.3;
  double occluded_sigma = 0.08;    // m
  double twist_sigma = 0.5;        // rad, occluded joints only
  double confidence_scale = 0.05;  // m
  double confidence_floor = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoseSample {
  Eigen::VectorXd beta;        // beta_dim
  Eigen::VectorXd rot_gt;      // 6K
  Eigen::VectorXd p_gt;        // 3K, = fk_positions(rot_gt, beta)
  Eigen::VectorXd twists_gt;   // 2(K-1), (cos, sin) pairs
  Eigen::VectorXd p_obs;       // 3K
  Eigen::VectorXd twists_obs;  // 2(K-1)
  Eigen::VectorXd confidence;  // K, in [0, 1]
  std::vector<std::uint8_t> occluded;  // K
};

struct Dataset {
  std::uint64_t tree_hash = 0;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  std::vector<PoseSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

struct GtPose {
  PoseRotations rotations;
  Eigen::VectorXd beta;
};

// Swing sampled uniformly in the per-joint cone about the twist axis,
// twist uniform within its limit, beta ~ U(-1,1)^beta_dim.
GtPose sample_gt_pose(const KinematicTree& tree, Rng& rng);

PoseSample synthesize_observation(const KinematicTree& tree, const GtPose& gt,
                                  const NoiseConfig& noise, Rng& rng);

// Deterministic per-sample substreams; identical output for a given
// (tree, noise, seed, count) regardless of thread count.
Dataset generate_dataset(const KinematicTree& tree, const NoiseConfig& noise,
                         std::uint64_t seed, int count, int threads = 1);

// Standard split derivation: the split's own seed is
// splitmix64(master_seed + salt) with salts 0/1/2 for train/val/test.
Dataset generate_split(const KinematicTree& tree, const NoiseConfig& base_noise,
                       std::uint64_t master_seed, std::uint64_t salt, int count,
                       int threads = 1);

// Binary container: magic + version + JSON header (tree hash, noise
// config, seed, count) + packed little-endian doubles per record.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path, const KinematicTree& expected_tree);

// Columns-of-samples views used by training/eval (rows = samples).
struct BatchView {
  ad::Mat beta, rot_gt, p_gt, twists_gt, p_obs, twists_obs, confidence, swing_gt;
};
BatchView make_batch(const KinematicTree& tree, const Dataset& dataset,
                     const std::vector<int>& indices);

}  // namespace kinflow
