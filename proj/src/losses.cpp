#include "kinflow/losses.hpp"

#include "kinflow/data.hpp"
#include "kinflow/optim.hpp"

#include <algorithm>
#include <cmath>

namespace kinflow {

using namespace ad;

double median_pairwise_distance(const Mat& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) return 1.0;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((x.row(i) - x.row(j)).norm());
  std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2),
                   dists.end());
  const double med = dists[dists.size() / 2];
  return med > 1e-12 ? med : 1.0;
}

namespace {

// squared distances: d2(i,j) = |x_i|^2 + |y_j|^2 - 2 x_i . y_j
Mat squared_distances(const Mat& x, const Mat& y) {
  Eigen::VectorXd xs = x.rowwise().squaredNorm();
  Eigen::VectorXd ys = y.rowwise().squaredNorm();
  Mat d2 = (-2.0 * x * y.transpose());
  d2.colwise() += xs;
  d2.rowwise() += ys.transpose();
  return d2.cwiseMax(0.0);
}

Mat kernel_matrix(const Mat& d2, const MmdKernel& kernel, const std::vector<double>& bandwidths) {
  Mat k = Mat::Zero(d2.rows(), d2.cols());
  for (double h : bandwidths) {
    if (kernel.family == MmdKernel::Family::gaussian_mixture) {
      k += (-d2.array() / (2.0 * h * h)).exp().matrix();
    } else {
      k += (h * h / (h * h + d2.array())).matrix();
    }
  }
  return k;
}

// dL/dx_i for the terms involving x, given per-pair weights w(i,j) on
// k(x_i, y_j): sum_j w_ij dk/dx_i. For the gaussian family
// dk/dx_i = -k_h (x_i - y_j) / h^2; for inverse multiquadric
// dk/dx_i = -2 k_h^2 (x_i - y_j) / h^2.
Mat kernel_grad_x(const Mat& x, const Mat& y, const Mat& d2, const MmdKernel& kernel,
                  const std::vector<double>& bandwidths, double pair_weight) {
  Mat grad = Mat::Zero(x.rows(), x.cols());
  for (double h : bandwidths) {
    Mat w;  // (n x m) scalar weight on (x_i - y_j)
    if (kernel.family == MmdKernel::Family::gaussian_mixture) {
      w = ((-d2.array() / (2.0 * h * h)).exp() * (-1.0 / (h * h))).matrix();
    } else {
      Mat k = (h * h / (h * h + d2.array())).matrix();
      w = (k.array().square() * (-2.0 / (h * h))).matrix();
    }
    w *= pair_weight;
    // sum_j w_ij (x_i - y_j) = (row sums of w) * x_i - w * y
    grad += (x.array().colwise() * w.rowwise().sum().array()).matrix() - w * y;
  }
  return grad;
}

}  // namespace

double mmd_estimate(const Mat& x, const Mat& y, const MmdKernel& kernel,
                    const std::vector<double>& bandwidths) {
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd_estimate: dim mismatch");
  if (x.rows() < 2 || y.rows() < 2) throw std::invalid_argument("mmd_estimate: need >= 2 rows");
  const Mat kxx = kernel_matrix(squared_distances(x, x), kernel, bandwidths);
  const Mat kyy = kernel_matrix(squared_distances(y, y), kernel, bandwidths);
  const Mat kxy = kernel_matrix(squared_distances(x, y), kernel, bandwidths);
  return kxx.mean() + kyy.mean() - 2.0 * kxy.mean();
}

Var mmd_estimate(Var x, const Mat& y, const MmdKernel& kernel,
                 const std::vector<double>& bandwidths) {
  Tape& tape = *x.tape();
  const Mat xv = x.value();
  if (xv.cols() != y.cols()) throw std::invalid_argument("mmd_estimate: dim mismatch");
  const Mat d2xx = squared_distances(xv, xv);
  const Mat d2xy = squared_distances(xv, y);
  Mat value(1, 1);
  value(0, 0) = kernel_matrix(d2xx, kernel, bandwidths).mean() +
                kernel_matrix(squared_distances(y, y), kernel, bandwidths).mean() -
                2.0 * kernel_matrix(d2xy, kernel, bandwidths).mean();
  const double n = static_cast<double>(xv.rows());
  const double m = static_cast<double>(y.rows());
  return tape.make_node(
      std::move(value), {x},
      [y, d2xx, d2xy, kernel, bandwidths, n, m](Tape& tp, const Mat& g,
                                                const std::vector<Var>& p) {
        const Mat& xv = p[0].value();
        // mean k(X,X): each unordered pair appears twice; d/dx_i picks up
        // both roles, giving factor 2 / n^2
        Mat grad = kernel_grad_x(xv, xv, d2xx, kernel, bandwidths, 2.0 / (n * n));
        // -2 mean k(X,Y)
        grad += kernel_grad_x(xv, y, d2xy, kernel, bandwidths, -2.0 / (n * m));
        tp.add_grad(p[0], g(0, 0) * grad);
      });
}

Var loss_inverse(Tape& tape, const KinematicTree& tree, Var rot_pred, const Mat& rot_gt,
                 const Mat& p_gt, const Mat& bone_vecs) {
  const double n = static_cast<double>(rot_pred.rows());
  Var rot_term = sum_sq(sub(rot_pred, tape.constant(rot_gt)));
  Var fk = fk_positions_tape(tape, tree, rot_pred, bone_vecs);
  Var fk_term = l1(sub(fk, tape.constant(p_gt)));
  return scale(add(rot_term, fk_term), 1.0 / n);
}

Var loss_forward(Tape& tape, Var p_fwd, Var phi_fwd, const Mat& p_obs, const Mat& phi_obs) {
  const double n = static_cast<double>(p_fwd.rows());
  Var term = add(l1(sub(p_fwd, tape.constant(p_obs))),
                 sum_sq(sub(phi_fwd, tape.constant(phi_obs))));
  return scale(term, 1.0 / n);
}

Var loss_independence(Tape& /*tape*/, Var rot_inv, Var z, const Mat& rot_gt, Rng& rng,
                      const MmdKernel& kernel, bool* small_batch_warning) {
  const Eigen::Index n = rot_inv.rows();
  if (small_batch_warning) *small_batch_warning = n < 8;
  Mat product(n, rot_gt.cols() + z.cols());
  product.leftCols(rot_gt.cols()) = rot_gt;
  product.rightCols(z.cols()) = rng.normal_matrix(n, z.cols());
  std::vector<double> bandwidths;
  const double med = median_pairwise_distance(product);
  for (double s : kernel.bandwidth_scales) bandwidths.push_back(s * med);
  Var joint = hcat({rot_inv, z});
  return mmd_estimate(joint, product, kernel, bandwidths);
}

Var boundary_inverse_term(Tape& tape, const FlowIkModel::IkOut& pass, const Mat& rot_gt) {
  const double n = static_cast<double>(rot_gt.rows());
  Var latent = sum_sq(pass.z);
  if (pass.z_swing.valid()) latent = add(latent, sum_sq(pass.z_swing));
  Var rot_term = sum_sq(sub(pass.rot, tape.constant(rot_gt)));
  return scale(add(latent, rot_term), 1.0 / n);
}

Var boundary_forward_term(Tape& tape, const FlowIkModel::FkOut& pass, const Mat& p_gt,
                          const Mat& phi_gt) {
  const double n = static_cast<double>(p_gt.rows());
  Var term = add(l1(sub(pass.p, tape.constant(p_gt))),
                 sum_sq(sub(pass.phi, tape.constant(phi_gt))));
  return scale(term, 1.0 / n);
}

BoundaryInverseOut loss_boundary_inverse(Tape& tape, const FlowIkModel& model,
                                         const FlowIkModel::Lifted& vars, const Mat& p_gt,
                                         const Mat& phi_gt, const Mat& s_clean, const Mat& beta,
                                         const Mat& rot_gt) {
  BoundaryInverseOut out{Var(), model.ik(tape, vars, tape.constant(p_gt),
                                         tape.constant(phi_gt), tape.constant(s_clean),
                                         tape.constant(beta))};
  out.loss = boundary_inverse_term(tape, out.pass, rot_gt);
  return out;
}

BoundaryForwardOut loss_boundary_forward(Tape& tape, const FlowIkModel& model,
                                         const FlowIkModel::Lifted& vars, const Mat& rot_gt,
                                         const Mat& beta, const Mat& p_gt, const Mat& phi_gt) {
  const Eigen::Index n = rot_gt.rows();
  Var zero = tape.constant(Mat::Zero(n, model.layout().Dz));
  Var zero_sw = model.has_swing_stage()
                    ? tape.constant(Mat::Zero(n, model.layout().Dsw))
                    : Var();
  BoundaryForwardOut out{Var(), model.fk(tape, vars, tape.constant(rot_gt), zero, zero_sw,
                                         tape.constant(beta))};
  out.loss = boundary_forward_term(tape, out.pass, p_gt, phi_gt);
  return out;
}

Var loss_swing(Tape& tape, Var swing_pred, const Mat& swing_target) {
  const double n = static_cast<double>(swing_pred.rows());
  return scale(sum_sq(sub(swing_pred, tape.constant(swing_target))), 1.0 / n);
}

Var loss_padding(Tape& tape, Var pads) {
  const double n = static_cast<double>(pads.rows());
  (void)tape;
  return scale(sum_sq(pads), 1.0 / n);
}

Var total_loss(Tape& tape, const LossTerms& terms, const LossWeights& weights) {
  struct Entry {
    const Var* term;
    double weight;
    const char* name;
  };
  const Entry entries[] = {
      {&terms.inverse, weights.inverse, "inverse"},
      {&terms.forward, weights.forward, "forward"},
      {&terms.independence, weights.independence, "independence"},
      {&terms.boundary_inverse, weights.boundary_inverse, "boundary_inverse"},
      {&terms.boundary_forward, weights.boundary_forward, "boundary_forward"},
      {&terms.swing, weights.swing, "swing"},
      {&terms.padding, weights.padding, "padding"},
  };
  Var total;
  for (const Entry& e : entries) {
    if (!e.term->valid()) continue;
    if (!std::isfinite(e.term->value()(0, 0)))
      throw std::runtime_error(std::string("total_loss: non-finite term ") + e.name);
    Var weighted = scale(*e.term, e.weight);
    total = total.valid() ? add(total, weighted) : weighted;
  }
  if (!total.valid()) return tape.scalar(0.0);
  return total;
}

namespace {

struct BatterySetup {
  KinematicTree tree = KinematicTree::default_humanoid();
  FlowIkModel model;
  BatchView batch;
  Mat ones, bone_vecs;

  BatterySetup(ModelKind kind, std::uint64_t seed)
      : model(kind, [] {
          ModelDims d;
          d.blocks = 2;
          d.hidden = 8;
          return d;
        }()) {
    Rng jit(seed);
    auto perturb = [&](CouplingBlock& block) {
      for (MlpParams* m : {&block.s1, &block.t1, &block.s2, &block.t2}) {
        m->weights.back() = jit.uniform_matrix(m->weights.back().rows(),
                                               m->weights.back().cols(), -0.05, 0.05);
        m->biases.back() = jit.uniform_matrix(1, m->biases.back().cols(), -0.05, 0.05);
      }
    };
    for (auto& block : model.net1().blocks) perturb(block);
    if (model.net2())
      for (auto& block : model.net2()->blocks) perturb(block);
    NoiseConfig noise;
    Dataset data = generate_dataset(tree, noise, seed, 6);
    batch = make_batch(tree, data, {0, 1, 2, 3, 4, 5});
    ones = Mat::Ones(6, tree.joint_count());
    bone_vecs = bone_vectors(tree, batch.beta);
  }
};

TermCheck check_battery_term(BatterySetup& s, const std::string& name, int components,
                             const std::function<Var(Tape&, const FlowIkModel::Lifted&)>& build) {
  std::vector<Mat*> params = s.model.param_ptrs();
  std::vector<Mat> analytic;
  {
    Tape tape;
    auto vars = s.model.lift(tape, true);
    Var loss = build(tape, vars);
    tape.backward(loss);
    for (Mat* p : params) analytic.push_back(tape.grad_by_storage(p));
  }
  auto loss_fn = [&] {
    Tape tape;
    auto vars = s.model.lift(tape, false);
    return build(tape, vars).value()(0, 0);
  };
  Rng pick(123);
  const GradCheckReport r = grad_check(loss_fn, params, analytic, 1e-4, 1e-5, pick, components);
  return {name, r.pass, r.worst_rel_err, r.components_checked};
}

}  // namespace

std::vector<TermCheck> run_gradient_battery(ModelKind kind, int components,
                                            std::uint64_t seed) {
  BatterySetup s(kind, seed);
  std::vector<TermCheck> out;
  auto ik_pass = [&](Tape& tape, const FlowIkModel::Lifted& vars) {
    return s.model.ik(tape, vars, tape.constant(s.batch.p_obs),
                      tape.constant(s.batch.twists_obs), tape.constant(s.batch.confidence),
                      tape.constant(s.batch.beta));
  };
  out.push_back(check_battery_term(s, "inverse", components,
                                   [&](Tape& tape, const FlowIkModel::Lifted& vars) {
                                     return loss_inverse(tape, s.tree, ik_pass(tape, vars).rot,
                                                         s.batch.rot_gt, s.batch.p_gt,
                                                         s.bone_vecs);
                                   }));
  const auto frozen = s.model.ik_eval(s.batch.p_obs, s.batch.twists_obs, s.batch.confidence,
                                      s.batch.beta);
  auto frozen_latents = [&](Tape& tape, Var& z, Var& z_sw) {
    z = tape.constant(frozen.z);
    z_sw = s.model.has_swing_stage() ? tape.constant(frozen.z_swing) : Var();
  };
  out.push_back(check_battery_term(
      s, "forward", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        Var z, z_sw;
        frozen_latents(tape, z, z_sw);
        auto fwd = s.model.fk(tape, vars, tape.constant(s.batch.rot_gt), z, z_sw,
                              tape.constant(s.batch.beta));
        return loss_forward(tape, fwd.p, fwd.phi, s.batch.p_obs, s.batch.twists_obs);
      }));
  out.push_back(check_battery_term(
      s, "independence", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        auto inv = ik_pass(tape, vars);
        Rng rng(55);  // fixed so FD re-evaluations see the same product draw
        MmdKernel kernel;
        return loss_independence(tape, inv.rot, inv.z, s.batch.rot_gt, rng, kernel);
      }));
  out.push_back(check_battery_term(
      s, "boundary_inverse", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        auto pass = s.model.ik(tape, vars, tape.constant(s.batch.p_gt),
                               tape.constant(s.batch.twists_gt), tape.constant(s.ones),
                               tape.constant(s.batch.beta));
        return boundary_inverse_term(tape, pass, s.batch.rot_gt);
      }));
  auto zero_latents = [&](Tape& tape, Var& z, Var& z_sw) {
    z = tape.constant(Mat::Zero(s.batch.rot_gt.rows(), s.model.layout().Dz));
    z_sw = s.model.has_swing_stage()
               ? tape.constant(Mat::Zero(s.batch.rot_gt.rows(), s.model.layout().Dsw))
               : Var();
  };
  out.push_back(check_battery_term(
      s, "boundary_forward", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        Var z, z_sw;
        zero_latents(tape, z, z_sw);
        auto pass = s.model.fk(tape, vars, tape.constant(s.batch.rot_gt), z, z_sw,
                               tape.constant(s.batch.beta));
        return boundary_forward_term(tape, pass, s.batch.p_gt, s.batch.twists_gt);
      }));
  if (s.model.has_swing_stage()) {
    out.push_back(check_battery_term(
        s, "swing_inverse", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
          return loss_swing(tape, ik_pass(tape, vars).swing, s.batch.swing_gt);
        }));
    out.push_back(check_battery_term(
        s, "swing_forward", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
          Var z, z_sw;
          frozen_latents(tape, z, z_sw);
          auto fwd = s.model.fk(tape, vars, tape.constant(s.batch.rot_gt), z, z_sw,
                                tape.constant(s.batch.beta));
          return loss_swing(tape, fwd.swing, frozen.swing);
        }));
  }
  out.push_back(check_battery_term(
      s, "padding", components, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        Var z, z_sw;
        zero_latents(tape, z, z_sw);
        auto pass = s.model.fk(tape, vars, tape.constant(s.batch.rot_gt), z, z_sw,
                               tape.constant(s.batch.beta));
        return loss_padding(tape, pass.pads);
      }));
  return out;
}

}  // namespace kinflow
