#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinflow/cli.hpp"
#include "kinflow/config.hpp"
#include "kinflow/evaluation.hpp"
#include "kinflow/training.hpp"

namespace py = pybind11;
using namespace kinflow;

namespace {

std::vector<TwistAngle> twists_from_flat(const Eigen::VectorXd& flat) {
  std::vector<TwistAngle> out;
  for (Eigen::Index j = 0; j + 1 < flat.size(); j += 2) out.push_back({flat(j), flat(j + 1)});
  return out;
}

Eigen::VectorXd twists_to_flat(const std::vector<TwistAngle>& twists) {
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(twists.size()));
  for (std::size_t j = 0; j < twists.size(); ++j) {
    out(2 * static_cast<Eigen::Index>(j)) = twists[j].c;
    out(2 * static_cast<Eigen::Index>(j) + 1) = twists[j].s;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_kinflow, m) {
  m.doc() = "bidirectional invertible-network inverse kinematics core";

  py::class_<KinematicTree>(m, "KinematicTree")
      .def_static("default_humanoid", &KinematicTree::default_humanoid)
      .def_static("load", &load_skeleton, py::arg("path"))
      .def("save", [](const KinematicTree& t, const std::string& path) { save_skeleton(path, t); })
      .def_property_readonly("joint_count", &KinematicTree::joint_count)
      .def_property_readonly("beta_dim", &KinematicTree::beta_dim)
      .def_property_readonly("names", [](const KinematicTree& t) { return t.names; })
      .def_property_readonly("parents", [](const KinematicTree& t) { return t.parent; })
      .def("hash", &KinematicTree::hash)
      .def("bone_lengths", &bone_lengths_from_beta, py::arg("beta"));

  m.def("fk_positions",
        [](const KinematicTree& tree, const Eigen::VectorXd& rot6d, const Eigen::VectorXd& beta) {
          return fk_positions(tree, unflatten_rot6d(rot6d), beta);
        },
        py::arg("tree"), py::arg("rot6d"), py::arg("beta"),
        "joint positions (3K) from flat 6D rotations (6K)");

  m.def("analytic_ik",
        [](const KinematicTree& tree, const Eigen::VectorXd& positions,
           const Eigen::VectorXd& twists, const Eigen::VectorXd& beta) {
          return flatten_rot6d(analytic_ik(tree, positions, twists_from_flat(twists), beta));
        },
        py::arg("tree"), py::arg("positions"), py::arg("twists"), py::arg("beta"),
        "per-joint 6D rotations from positions (3K) and twist (cos, sin) pairs (2(K-1))");

  m.def("decompose_twists",
        [](const KinematicTree& tree, const Eigen::VectorXd& rot6d) {
          return twists_to_flat(decompose_twists(tree, unflatten_rot6d(rot6d)));
        },
        py::arg("tree"), py::arg("rot6d"));

  m.def("rot6d_to_matrix",
        [](const Vec6& r) { return Eigen::Matrix3d(rot6d_to_matrix(r)); }, py::arg("rot6d"));
  m.def("matrix_to_rot6d", [](const Eigen::Matrix3d& r) { return matrix_to_rot6d(r); },
        py::arg("matrix"));
  m.def("twist_swing_decompose",
        [](const Eigen::Matrix3d& r, const Vec3& axis) {
          const TwistSwing ts = twist_swing_decompose(r, axis);
          return py::make_tuple(Eigen::Matrix3d(ts.swing),
                                py::make_tuple(ts.twist.c, ts.twist.s));
        },
        py::arg("rotation"), py::arg("axis"));
  m.def("twist_swing_compose",
        [](const Eigen::Matrix3d& swing, double c, double s, const Vec3& axis) {
          return Eigen::Matrix3d(twist_swing_compose(swing, {c, s}, axis));
        },
        py::arg("swing"), py::arg("cos"), py::arg("sin"), py::arg("axis"));

  m.def("mpjpe_mm", &mpjpe_mm, py::arg("pred"), py::arg("gt"),
        "mean per-joint position error over root-aligned flat positions, mm");
  m.def("pa_mpjpe_mm", &pa_mpjpe_mm, py::arg("pred"), py::arg("gt"));
  m.def("rot_geodesic_deg", &rot_geodesic_deg, py::arg("pred6d"), py::arg("gt6d"));
  m.def("root_align", &root_align, py::arg("positions"));

  py::class_<NoiseConfig>(m, "NoiseConfig")
      .def(py::init<>())
      .def_readwrite("base_sigma", &NoiseConfig::base_sigma)
      .def_readwrite("occlusion_prob", &NoiseConfig::occlusion_prob)
      .def_readwrite("occluded_sigma", &NoiseConfig::occluded_sigma)
      .def_readwrite("twist_sigma", &NoiseConfig::twist_sigma)
      .def_readwrite("confidence_scale", &NoiseConfig::confidence_scale)
      .def_readwrite("confidence_floor", &NoiseConfig::confidence_floor);

  py::class_<PoseSample>(m, "PoseSample")
      .def_readonly("beta", &PoseSample::beta)
      .def_readonly("rot_gt", &PoseSample::rot_gt)
      .def_readonly("p_gt", &PoseSample::p_gt)
      .def_readonly("twists_gt", &PoseSample::twists_gt)
      .def_readonly("p_obs", &PoseSample::p_obs)
      .def_readonly("twists_obs", &PoseSample::twists_obs)
      .def_readonly("confidence", &PoseSample::confidence)
      .def_readonly("occluded", &PoseSample::occluded);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", &Dataset::size)
      .def_readonly("tree_hash", &Dataset::tree_hash)
      .def("__len__", &Dataset::size)
      .def("__getitem__",
           [](const Dataset& d, int i) {
             if (i < 0 || i >= d.size()) throw py::index_error();
             return d.samples[static_cast<std::size_t>(i)];
           });

  m.def("generate_dataset", &generate_dataset, py::arg("tree"), py::arg("noise"),
        py::arg("seed"), py::arg("count"), py::arg("threads") = 1);
  m.def("write_dataset", &write_dataset, py::arg("path"), py::arg("dataset"));
  m.def("read_dataset", &read_dataset, py::arg("path"), py::arg("tree"));

  py::class_<FlowIkModel, std::shared_ptr<FlowIkModel>>(m, "FlowIkModel")
      .def(py::init([](const std::string& kind, int blocks, int hidden, int z_dim,
                       std::uint64_t seed) {
             ModelDims dims;
             dims.blocks = blocks;
             dims.hidden = hidden;
             dims.z_dim = z_dim;
             dims.init_seed = seed;
             return std::make_shared<FlowIkModel>(model_kind_from_string(kind), dims);
           }),
           py::arg("kind") = "one_stage", py::arg("blocks") = 8, py::arg("hidden") = 128,
           py::arg("z_dim") = 32, py::arg("seed") = 1)
      .def_property_readonly("kind", [](const FlowIkModel& m) { return to_string(m.kind()); })
      .def_property_readonly("param_count", &FlowIkModel::param_count)
      .def("ik",
           [](const FlowIkModel& model, const ad::Mat& p, const ad::Mat& phi, const ad::Mat& s,
              const ad::Mat& beta) {
             auto r = model.ik_eval(p, phi, s, beta);
             return py::make_tuple(r.rot, r.z);
           },
           py::arg("positions"), py::arg("twists"), py::arg("confidence"), py::arg("beta"),
           "batched IK: rows are samples; returns (rotations 6K, error embedding)")
      .def("fk",
           [](const FlowIkModel& model, const ad::Mat& rot, const ad::Mat& z,
              const ad::Mat& z_swing, const ad::Mat& beta) {
             auto r = model.fk_eval(rot, z, z_swing, beta);
             return py::make_tuple(r.p, r.phi, r.s);
           },
           py::arg("rotations"), py::arg("z"), py::arg("z_swing"), py::arg("beta"),
           "batched forward map: returns (positions, twists, confidence slots)");

  m.def("load_flow_checkpoint",
        [](const std::string& path) {
          std::shared_ptr<FlowIkModel> model = restore_flow_model(load_checkpoint(path));
          return model;
        },
        py::arg("path"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::vector<std::string> argv_s = args;
          argv_s.insert(argv_s.begin(), "kinflow");
          std::vector<char*> argv;
          for (auto& a : argv_s) argv.push_back(a.data());
          return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "run a CLI subcommand in-process, returns the exit code");
}
