#include "kinflow/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kinflow/rng.hpp"

namespace kinflow {

namespace {
constexpr int kSkeletonFormatVersion = 1;
}

Vec3 KinematicTree::twist_axis(int j) const {
  const auto& kids = children(j);
  if (!kids.empty()) return rest_dirs.col(kids.front() - 1);
  if (j == 0) throw std::logic_error("twist_axis: root without children");
  return rest_dirs.col(j - 1);
}

void KinematicTree::finalize() {
  children_.assign(parent.size(), {});
  for (std::size_t j = 1; j < parent.size(); ++j)
    children_[static_cast<std::size_t>(parent[j])].push_back(static_cast<int>(j));
  validate();
}

void KinematicTree::validate() const {
  const int K = joint_count();
  if (K < 2) throw std::invalid_argument("KinematicTree: need at least 2 joints");
  if (parent[0] != 0) throw std::invalid_argument("KinematicTree: joint 0 must be the root");
  for (int j = 1; j < K; ++j)
    if (parent[static_cast<std::size_t>(j)] < 0 || parent[static_cast<std::size_t>(j)] >= j)
      throw std::invalid_argument("KinematicTree: parents must precede children");
  if (names.size() != static_cast<std::size_t>(K))
    throw std::invalid_argument("KinematicTree: name count mismatch");
  if (rest_dirs.cols() != K - 1 || base_lengths.size() != K - 1 || beta_map.rows() != K - 1)
    throw std::invalid_argument("KinematicTree: bone array size mismatch");
  if (limits.size() != static_cast<std::size_t>(K))
    throw std::invalid_argument("KinematicTree: limits size mismatch");
  for (int b = 0; b < K - 1; ++b) {
    if (std::abs(rest_dirs.col(b).norm() - 1.0) > 1e-12)
      throw std::invalid_argument("KinematicTree: rest direction not unit length");
    if (base_lengths(b) <= 0.0)
      throw std::invalid_argument("KinematicTree: non-positive base length");
  }
  if (children_.empty() || children_[0].empty())
    throw std::invalid_argument("KinematicTree: root has no children (call finalize)");
}

Eigen::VectorXd bone_lengths_from_beta(const KinematicTree& tree, const Eigen::VectorXd& beta) {
  if (beta.size() != tree.beta_dim())
    throw std::invalid_argument("bone_lengths_from_beta: beta dim mismatch");
  if (!beta.allFinite())
    throw std::invalid_argument("bone_lengths_from_beta: non-finite beta");
  Eigen::VectorXd lengths = tree.base_lengths + tree.beta_map * beta;
  if ((lengths.array() <= 0.0).any())
    throw std::invalid_argument("bone_lengths_from_beta: non-positive length, beta out of range");
  return lengths;
}

KinematicTree KinematicTree::default_humanoid() {
  // 16 joints; the spine carries two segments so the 6K-dim layout below
  // stays at K = 16 with the dimension identities used by the flow model.
  struct JointSpec {
    const char* name;
    int parent;
    Vec3 dir;
    double len;
    double swing_deg;
    double twist_deg;
  };
  const double s = 1.0 / std::sqrt(0.36 + 0.64);
  const JointSpec spec[] = {
      {"pelvis", 0, Vec3::Zero(), 0.0, 30.0, 45.0},
      {"spine1", 0, {0, 0, 1}, 0.20, 30.0, 45.0},
      {"spine2", 1, {0, 0, 1}, 0.20, 30.0, 45.0},
      {"head", 2, {0, 0, 1}, 0.25, 30.0, 45.0},
      {"l_shoulder", 2, {0, 1, 0}, 0.18, 60.0, 45.0},
      {"l_elbow", 4, {0, 1, 0}, 0.28, 60.0, 45.0},
      {"l_wrist", 5, {0, 1, 0}, 0.26, 60.0, 90.0},
      {"r_shoulder", 2, {0, -1, 0}, 0.18, 60.0, 45.0},
      {"r_elbow", 7, {0, -1, 0}, 0.28, 60.0, 45.0},
      {"r_wrist", 8, {0, -1, 0}, 0.26, 60.0, 90.0},
      {"l_hip", 0, {0, 0.6 * s, -0.8 * s}, 0.12, 60.0, 45.0},
      {"l_knee", 10, {0, 0, -1}, 0.40, 60.0, 45.0},
      {"l_ankle", 11, {0, 0, -1}, 0.40, 60.0, 90.0},
      {"r_hip", 0, {0, -0.6 * s, -0.8 * s}, 0.12, 60.0, 45.0},
      {"r_knee", 13, {0, 0, -1}, 0.40, 60.0, 45.0},
      {"r_ankle", 14, {0, 0, -1}, 0.40, 60.0, 90.0},
  };
  const int K = static_cast<int>(std::size(spec));
  KinematicTree t;
  t.rest_dirs.resize(3, K - 1);
  t.base_lengths.resize(K - 1);
  for (int j = 0; j < K; ++j) {
    t.names.push_back(spec[j].name);
    t.parent.push_back(spec[j].parent);
    t.limits.push_back({spec[j].swing_deg, spec[j].twist_deg});
    if (j > 0) {
      t.rest_dirs.col(j - 1) = spec[j].dir.normalized();
      t.base_lengths(j - 1) = spec[j].len;
    }
  }
  // Shape map: seeded random rows rescaled so |row|_1 = 0.3 * base length,
  // keeping every length positive (and inside (0.05, 0.8) m) on U(-1,1)^10.
  const int beta_dim = 10;
  t.beta_map_seed = 20240611ULL;
  Rng rng(t.beta_map_seed);
  t.beta_map = rng.normal_matrix(K - 1, beta_dim);
  for (int b = 0; b < K - 1; ++b) {
    const double l1 = t.beta_map.row(b).lpNorm<1>();
    t.beta_map.row(b) *= 0.3 * t.base_lengths(b) / l1;
  }
  t.finalize();
  return t;
}

namespace {

nlohmann::json tree_to_json(const KinematicTree& t) {
  nlohmann::json j;
  j["format"] = "kinflow-skeleton";
  j["version"] = kSkeletonFormatVersion;
  j["names"] = t.names;
  j["parent"] = t.parent;
  const int K = t.joint_count();
  std::vector<std::vector<double>> dirs;
  for (int b = 0; b < K - 1; ++b)
    dirs.push_back({t.rest_dirs(0, b), t.rest_dirs(1, b), t.rest_dirs(2, b)});
  j["rest_dirs"] = dirs;
  j["base_lengths"] = std::vector<double>(t.base_lengths.data(), t.base_lengths.data() + K - 1);
  std::vector<std::vector<double>> bmap;
  for (int b = 0; b < K - 1; ++b) {
    std::vector<double> row(static_cast<std::size_t>(t.beta_map.cols()));
    for (int c = 0; c < t.beta_map.cols(); ++c) row[static_cast<std::size_t>(c)] = t.beta_map(b, c);
    bmap.push_back(std::move(row));
  }
  j["beta_map"] = bmap;
  j["beta_map_seed"] = t.beta_map_seed;
  std::vector<std::vector<double>> lim;
  for (const auto& l : t.limits) lim.push_back({l.swing_deg, l.twist_deg});
  j["limits"] = lim;
  return j;
}

KinematicTree tree_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != "kinflow-skeleton")
    throw std::runtime_error("skeleton: not a kinflow skeleton document");
  if (j.at("version").get<int>() != kSkeletonFormatVersion)
    throw std::runtime_error("skeleton: unsupported version");
  KinematicTree t;
  t.names = j.at("names").get<std::vector<std::string>>();
  t.parent = j.at("parent").get<std::vector<int>>();
  const int K = static_cast<int>(t.parent.size());
  const auto dirs = j.at("rest_dirs").get<std::vector<std::vector<double>>>();
  const auto lens = j.at("base_lengths").get<std::vector<double>>();
  const auto bmap = j.at("beta_map").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(dirs.size()) != K - 1 || static_cast<int>(lens.size()) != K - 1 ||
      static_cast<int>(bmap.size()) != K - 1)
    throw std::runtime_error("skeleton: inconsistent bone arrays");
  t.rest_dirs.resize(3, K - 1);
  t.base_lengths.resize(K - 1);
  t.beta_map.resize(K - 1, bmap.empty() ? 0 : static_cast<Eigen::Index>(bmap[0].size()));
  for (int b = 0; b < K - 1; ++b) {
    for (int c = 0; c < 3; ++c) t.rest_dirs(c, b) = dirs[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
    t.base_lengths(b) = lens[static_cast<std::size_t>(b)];
    for (int c = 0; c < t.beta_map.cols(); ++c)
      t.beta_map(b, c) = bmap[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
  }
  t.beta_map_seed = j.at("beta_map_seed").get<std::uint64_t>();
  for (const auto& l : j.at("limits")) t.limits.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
  t.finalize();
  return t;
}

}  // namespace

std::string KinematicTree::canonical_json() const { return tree_to_json(*this).dump(); }

std::uint64_t KinematicTree::hash() const {
  const std::string s = canonical_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_skeleton(const std::string& path, const KinematicTree& tree) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_skeleton: cannot open " + path);
  out << tree_to_json(tree).dump(2) << "\n";
}

KinematicTree load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_skeleton: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_skeleton: parse error: " + std::string(e.what()));
  }
  return tree_from_json(j);
}

}  // namespace kinflow
