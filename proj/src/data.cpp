#include "kinflow/data.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace kinflow {

namespace {
constexpr char kMagic[4] = {'K', 'F', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void NoiseConfig::validate() const {
  if (occlusion_prob < 0.0 || occlusion_prob > 1.0)
    throw std::invalid_argument("NoiseConfig: occlusion_prob outside [0,1]");
  if (base_sigma < 0.0 || occluded_sigma < 0.0 || twist_sigma < 0.0)
    throw std::invalid_argument("NoiseConfig: negative sigma");
  if (confidence_scale <= 0.0 || confidence_floor < 0.0 || confidence_floor > 1.0)
    throw std::invalid_argument("NoiseConfig: bad confidence parameters");
}

GtPose sample_gt_pose(const KinematicTree& tree, Rng& rng) {
  const int K = tree.joint_count();
  GtPose out;
  out.beta = rng.uniform_vector(tree.beta_dim(), -1.0, 1.0);
  out.rotations.resize(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j) {
    const JointLimits& lim = tree.limits[static_cast<std::size_t>(j)];
    const Vec3 axis = tree.twist_axis(j);
    // uniform direction in the spherical cap of half-angle swing_deg
    const double cos_max = std::cos(lim.swing_deg * M_PI / 180.0);
    const double ca = rng.uniform(cos_max, 1.0);
    const double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
    const double psi = rng.uniform(0.0, 2.0 * M_PI);
    Vec3 e1, e2;
    orthonormal_basis(axis, e1, e2);
    const Vec3 v = ca * axis + sa * (std::cos(psi) * e1 + std::sin(psi) * e2);
    const Mat3 swing = min_rotation_between(axis, v);
    const double twist = rng.uniform(-lim.twist_deg, lim.twist_deg) * M_PI / 180.0;
    out.rotations[static_cast<std::size_t>(j)] =
        twist_swing_compose(swing, {std::cos(twist), std::sin(twist)}, axis);
  }
  return out;
}

PoseSample synthesize_observation(const KinematicTree& tree, const GtPose& gt,
                                  const NoiseConfig& noise, Rng& rng) {
  noise.validate();
  const int K = tree.joint_count();
  PoseSample s;
  s.beta = gt.beta;
  s.rot_gt = flatten_rot6d(gt.rotations);
  s.p_gt = fk_positions(tree, gt.rotations, gt.beta);
  const auto twists = decompose_twists(tree, gt.rotations);
  s.twists_gt.resize(2 * (K - 1));
  for (int j = 0; j < K - 1; ++j) {
    s.twists_gt(2 * j) = twists[static_cast<std::size_t>(j)].c;
    s.twists_gt(2 * j + 1) = twists[static_cast<std::size_t>(j)].s;
  }

  s.occluded.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    s.occluded[static_cast<std::size_t>(k)] = rng.uniform01() < noise.occlusion_prob ? 1 : 0;

  s.p_obs = s.p_gt;
  s.confidence.resize(K);
  for (int k = 0; k < K; ++k) {
    const double sigma = s.occluded[static_cast<std::size_t>(k)] ? noise.occluded_sigma
                                                                 : noise.base_sigma;
    for (int c = 0; c < 3; ++c) s.p_obs(3 * k + c) += sigma * rng.normal();
    const double err = (s.p_obs.segment<3>(3 * k) - s.p_gt.segment<3>(3 * k)).norm();
    s.confidence(k) = std::min(1.0, std::max(noise.confidence_floor,
                                             std::exp(-err / noise.confidence_scale)));
  }

  s.twists_obs = s.twists_gt;
  for (int j = 1; j < K; ++j) {
    if (!s.occluded[static_cast<std::size_t>(j)] || noise.twist_sigma == 0.0) continue;
    const double angle = std::atan2(s.twists_gt(2 * (j - 1) + 1), s.twists_gt(2 * (j - 1))) +
                         noise.twist_sigma * rng.normal();
    s.twists_obs(2 * (j - 1)) = std::cos(angle);
    s.twists_obs(2 * (j - 1) + 1) = std::sin(angle);
  }
  return s;
}

Dataset generate_dataset(const KinematicTree& tree, const NoiseConfig& noise,
                         std::uint64_t seed, int count, int threads) {
  Dataset d;
  d.tree_hash = tree.hash();
  d.noise = noise;
  d.seed = seed;
  d.samples.resize(static_cast<std::size_t>(count));
  const Rng master(seed);
  auto fill = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Rng stream = master.substream(static_cast<std::uint64_t>(i));
      const GtPose gt = sample_gt_pose(tree, stream);
      d.samples[static_cast<std::size_t>(i)] = synthesize_observation(tree, gt, noise, stream);
    }
  };
  threads = std::max(1, std::min(threads, count == 0 ? 1 : count));
  if (threads == 1) {
    fill(0, count);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back(fill, std::min(count, t * chunk), std::min(count, (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }
  return d;
}

Dataset generate_split(const KinematicTree& tree, const NoiseConfig& base_noise,
                       std::uint64_t master_seed, std::uint64_t salt, int count,
                       int threads) {
  NoiseConfig noise = base_noise;
  noise.seed = splitmix64(master_seed + salt);
  return generate_dataset(tree, noise, noise.seed, count, threads);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("dataset: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("dataset: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// IEEE754 little-endian doubles (host is little-endian; asserted in write)
void put_doubles(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

Eigen::VectorXd get_doubles(std::istream& in, Eigen::Index n) {
  Eigen::VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
  if (!in) throw std::runtime_error("dataset: truncated record");
  if (!v.allFinite()) throw std::runtime_error("dataset: non-finite values in record");
  return v;
}

nlohmann::json noise_to_json(const NoiseConfig& n) {
  return {{"base_sigma", n.base_sigma},
          {"occlusion_prob", n.occlusion_prob},
          {"occluded_sigma", n.occluded_sigma},
          {"twist_sigma", n.twist_sigma},
          {"confidence_scale", n.confidence_scale},
          {"confidence_floor", n.confidence_floor},
          {"seed", n.seed}};
}

NoiseConfig noise_from_json(const nlohmann::json& j) {
  NoiseConfig n;
  n.base_sigma = j.at("base_sigma").get<double>();
  n.occlusion_prob = j.at("occlusion_prob").get<double>();
  n.occluded_sigma = j.at("occluded_sigma").get<double>();
  n.twist_sigma = j.at("twist_sigma").get<double>();
  n.confidence_scale = j.at("confidence_scale").get<double>();
  n.confidence_floor = j.at("confidence_floor").get<double>();
  n.seed = j.at("seed").get<std::uint64_t>();
  return n;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& dataset) {
  static_assert(std::endian::native == std::endian::little,
                "dataset format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, kDatasetVersion);
  nlohmann::json header = {{"tree_hash", dataset.tree_hash},
                           {"noise", noise_to_json(dataset.noise)},
                           {"seed", dataset.seed},
                           {"count", dataset.samples.size()}};
  const std::string hs = header.dump();
  put_u64(out, hs.size());
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const PoseSample& s : dataset.samples) {
    put_doubles(out, s.beta);
    put_doubles(out, s.rot_gt);
    put_doubles(out, s.p_gt);
    put_doubles(out, s.twists_gt);
    put_doubles(out, s.p_obs);
    put_doubles(out, s.twists_obs);
    put_doubles(out, s.confidence);
    out.write(reinterpret_cast<const char*>(s.occluded.data()),
              static_cast<std::streamsize>(s.occluded.size()));
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path, const KinematicTree& expected_tree) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("read_dataset: not a kinflow dataset (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kDatasetVersion)
    throw std::runtime_error("read_dataset: unsupported version " + std::to_string(version));
  const std::uint64_t header_len = get_u64(in);
  std::string hs(header_len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("read_dataset: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("read_dataset: corrupt header: " + std::string(e.what()));
  }

  Dataset d;
  d.tree_hash = header.at("tree_hash").get<std::uint64_t>();
  d.noise = noise_from_json(header.at("noise"));
  d.seed = header.at("seed").get<std::uint64_t>();
  if (d.tree_hash != expected_tree.hash())
    throw std::runtime_error("read_dataset: dataset was built for a different skeleton "
                             "(tree hash mismatch)");
  const auto count = header.at("count").get<std::uint64_t>();
  const int K = expected_tree.joint_count();
  const int beta_dim = expected_tree.beta_dim();
  d.samples.resize(count);
  for (auto& s : d.samples) {
    s.beta = get_doubles(in, beta_dim);
    s.rot_gt = get_doubles(in, 6 * K);
    s.p_gt = get_doubles(in, 3 * K);
    s.twists_gt = get_doubles(in, 2 * (K - 1));
    s.p_obs = get_doubles(in, 3 * K);
    s.twists_obs = get_doubles(in, 2 * (K - 1));
    s.confidence = get_doubles(in, K);
    s.occluded.resize(static_cast<std::size_t>(K));
    in.read(reinterpret_cast<char*>(s.occluded.data()), K);
    if (!in) throw std::runtime_error("read_dataset: truncated record");
  }
  return d;
}

BatchView make_batch(const KinematicTree& tree, const Dataset& dataset,
                     const std::vector<int>& indices) {
  const int K = tree.joint_count();
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  BatchView b;
  b.beta.resize(n, tree.beta_dim());
  b.rot_gt.resize(n, 6 * K);
  b.p_gt.resize(n, 3 * K);
  b.twists_gt.resize(n, 2 * (K - 1));
  b.p_obs.resize(n, 3 * K);
  b.twists_obs.resize(n, 2 * (K - 1));
  b.confidence.resize(n, K);
  b.swing_gt.resize(n, 6 * K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PoseSample& s = dataset.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    b.beta.row(i) = s.beta.transpose();
    b.rot_gt.row(i) = s.rot_gt.transpose();
    b.p_gt.row(i) = s.p_gt.transpose();
    b.twists_gt.row(i) = s.twists_gt.transpose();
    b.p_obs.row(i) = s.p_obs.transpose();
    b.twists_obs.row(i) = s.twists_obs.transpose();
    b.confidence.row(i) = s.confidence.transpose();
    b.swing_gt.row(i) =
        flatten_rot6d(swing_parts(tree, unflatten_rot6d(s.rot_gt))).transpose();
  }
  return b;
}

}  // namespace kinflow
