#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kinflow/data.hpp"

using namespace kinflow;

namespace {
std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}
}  // namespace

TEST_CASE("gt poses respect joint limits and stay consistent under fk") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const GtPose gt = sample_gt_pose(tree, rng);
    for (int j = 0; j < tree.joint_count(); ++j) {
      const auto ts = twist_swing_decompose(gt.rotations[static_cast<std::size_t>(j)],
                                            tree.twist_axis(j));
      const double swing_deg = geodesic_deg(ts.swing, Mat3::Identity());
      CHECK(swing_deg <= tree.limits[static_cast<std::size_t>(j)].swing_deg + 1e-9);
      const double twist_deg =
          std::abs(std::atan2(ts.twist.s, ts.twist.c)) * 180.0 / M_PI;
      CHECK(twist_deg <= tree.limits[static_cast<std::size_t>(j)].twist_deg + 1e-9);
    }
    const Eigen::VectorXd pos = fk_positions(tree, gt.rotations, gt.beta);
    CHECK(pos.allFinite());
  }
}

TEST_CASE("zero limits give the rest pose") {
  KinematicTree tree = KinematicTree::default_humanoid();
  for (auto& l : tree.limits) l = {0.0, 0.0};
  Rng rng(2);
  const GtPose gt = sample_gt_pose(tree, rng);
  for (const auto& r : gt.rotations) CHECK(r.isIdentity(1e-9));
}

TEST_CASE("zero noise reproduces the ground truth observation") {
  KinematicTree tree = KinematicTree::default_humanoid();
  Rng rng(3);
  const GtPose gt = sample_gt_pose(tree, rng);
  NoiseConfig noise;
  noise.base_sigma = 0.0;
  noise.occlusion_prob = 0.0;
  noise.occluded_sigma = 0.0;
  noise.twist_sigma = 0.0;
  const PoseSample s = synthesize_observation(tree, gt, noise, rng);
  CHECK((s.p_obs - s.p_gt).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.twists_obs - s.twists_gt).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.confidence.minCoeff() == 1.0);
  // stored GT is exact FK output
  CHECK((fk_positions(tree, unflatten_rot6d(s.rot_gt), s.beta) - s.p_gt)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("occluded noise has the configured scale") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  noise.occlusion_prob = 1.0;
  noise.base_sigma = 0.0;
  noise.occluded_sigma = 0.1;
  noise.twist_sigma = 0.0;
  Rng rng(4);
  double sumsq = 0;
  long n = 0;
  for (int trial = 0; trial < 700; ++trial) {
    const GtPose gt = sample_gt_pose(tree, rng);
    const PoseSample s = synthesize_observation(tree, gt, noise, rng);
    for (Eigen::Index i = 0; i < s.p_obs.size(); ++i) {
      sumsq += (s.p_obs(i) - s.p_gt(i)) * (s.p_obs(i) - s.p_gt(i));
      ++n;
    }
    for (auto o : s.occluded) CHECK(o == 1);
  }
  const double rms = std::sqrt(sumsq / static_cast<double>(n));
  CHECK(rms > 0.095);  // +-5% of 0.1 m over ~11k joints
  CHECK(rms < 0.105);
}

TEST_CASE("confidence decreases with realized position error") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  Rng rng(5);
  const GtPose gt = sample_gt_pose(tree, rng);
  const PoseSample s = synthesize_observation(tree, gt, noise, rng);
  for (int k = 0; k < tree.joint_count(); ++k) {
    const double err = (s.p_obs.segment<3>(3 * k) - s.p_gt.segment<3>(3 * k)).norm();
    const double expected =
        std::min(1.0, std::max(noise.confidence_floor, std::exp(-err / noise.confidence_scale)));
    CHECK(s.confidence(k) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.confidence(k) >= noise.confidence_floor);
    CHECK(s.confidence(k) <= 1.0);
  }
}

TEST_CASE("dataset generation is deterministic and thread-count independent") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  const Dataset a = generate_dataset(tree, noise, 99, 64, 1);
  const Dataset b = generate_dataset(tree, noise, 99, 64, 4);
  REQUIRE(a.size() == b.size());
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.samples[static_cast<std::size_t>(i)].p_obs ==
          b.samples[static_cast<std::size_t>(i)].p_obs);
    CHECK(a.samples[static_cast<std::size_t>(i)].rot_gt ==
          b.samples[static_cast<std::size_t>(i)].rot_gt);
  }
  const Dataset c = generate_dataset(tree, noise, 100, 64, 1);
  CHECK(a.samples[0].p_obs != c.samples[0].p_obs);
}

TEST_CASE("dataset io round trips bit-identically") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  const Dataset d = generate_dataset(tree, noise, 7, 32);
  const auto p1 = tmp_file("kf_data1.bin");
  const auto p2 = tmp_file("kf_data2.bin");
  write_dataset(p1.string(), d);
  write_dataset(p2.string(), d);
  CHECK(file_bytes(p1) == file_bytes(p2));  // byte-determinism

  const Dataset back = read_dataset(p1.string(), tree);
  REQUIRE(back.size() == d.size());
  for (int i = 0; i < d.size(); ++i) {
    const auto& a = d.samples[static_cast<std::size_t>(i)];
    const auto& b = back.samples[static_cast<std::size_t>(i)];
    CHECK(a.beta == b.beta);
    CHECK(a.rot_gt == b.rot_gt);
    CHECK(a.p_gt == b.p_gt);
    CHECK(a.twists_gt == b.twists_gt);
    CHECK(a.p_obs == b.p_obs);
    CHECK(a.twists_obs == b.twists_obs);
    CHECK(a.confidence == b.confidence);
    CHECK(a.occluded == b.occluded);
  }
  // GT consistency on read
  for (const auto& s : back.samples) {
    CHECK((fk_positions(tree, unflatten_rot6d(s.rot_gt), s.beta) - s.p_gt)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    const auto twists = decompose_twists(tree, unflatten_rot6d(s.rot_gt));
    for (int j = 0; j < tree.joint_count() - 1; ++j) {
      CHECK(s.twists_gt(2 * j) == doctest::Approx(twists[static_cast<std::size_t>(j)].c).epsilon(1e-12));
      CHECK(s.twists_gt(2 * j + 1) == doctest::Approx(twists[static_cast<std::size_t>(j)].s).epsilon(1e-12));
    }
  }
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("dataset io structured errors") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  const Dataset d = generate_dataset(tree, noise, 3, 8);
  const auto path = tmp_file("kf_data_err.bin");
  write_dataset(path.string(), d);

  // corrupted magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_WITH_AS(read_dataset(path.string(), tree),
                       doctest::Contains("bad magic"), std::runtime_error);

  // wrong skeleton
  write_dataset(path.string(), d);
  KinematicTree other = KinematicTree::default_humanoid();
  other.base_lengths(0) += 0.01;
  other.finalize();
  CHECK_THROWS_WITH_AS(read_dataset(path.string(), other),
                       doctest::Contains("tree hash"), std::runtime_error);

  // truncation
  const std::string bytes = file_bytes(path);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_dataset(path.string(), tree), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("empty dataset round trips") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  const Dataset d = generate_dataset(tree, noise, 1, 0);
  const auto path = tmp_file("kf_data_empty.bin");
  write_dataset(path.string(), d);
  const Dataset back = read_dataset(path.string(), tree);
  CHECK(back.size() == 0);
  CHECK(back.tree_hash == tree.hash());
  std::filesystem::remove(path);
}

TEST_CASE("batch views gather the right rows") {
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  const Dataset d = generate_dataset(tree, noise, 11, 16);
  const BatchView b = make_batch(tree, d, {3, 7});
  CHECK(b.p_obs.rows() == 2);
  CHECK(b.p_obs.row(0).transpose() == d.samples[3].p_obs);
  CHECK(b.rot_gt.row(1).transpose() == d.samples[7].rot_gt);
  // swing of the root equals the full root rotation
  const PoseRotations pose = unflatten_rot6d(d.samples[3].rot_gt);
  CHECK(b.swing_gt.row(0).head<6>().transpose() == matrix_to_rot6d(pose[0]));
}
