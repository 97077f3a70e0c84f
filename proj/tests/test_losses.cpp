#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kinflow/data.hpp"
#include "kinflow/losses.hpp"
#include "kinflow/optim.hpp"
#include "kinflow/training.hpp"

using namespace kinflow;
using namespace kinflow::ad;

namespace {

// Miniature setup shared by the gradient battery: width-8 conditioner
// nets, 2 blocks, a small batch of real synthetic data.
struct Mini {
  KinematicTree tree = KinematicTree::default_humanoid();
  FlowIkModel model;
  BatchView batch;
  Mat ones;
  Mat bone_vecs;

  explicit Mini(ModelKind kind, int batch_size = 6, std::uint64_t seed = 77)
      : model(kind, mini_dims()) {
    Rng jit(seed);
    for (auto& block : model.net1().blocks) perturb(block, jit);
    if (model.net2())
      for (auto& block : model.net2()->blocks) perturb(block, jit);
    NoiseConfig noise;
    Dataset data = generate_dataset(tree, noise, seed, batch_size);
    std::vector<int> idx;
    for (int i = 0; i < batch_size; ++i) idx.push_back(i);
    batch = make_batch(tree, data, idx);
    ones = Mat::Ones(batch_size, 16);
    bone_vecs = bone_vectors(tree, batch.beta);
  }

  static ModelDims mini_dims() {
    ModelDims d;
    d.blocks = 2;
    d.hidden = 8;
    return d;
  }

  static void perturb(CouplingBlock& block, Rng& rng) {
    for (MlpParams* m : {&block.s1, &block.t1, &block.s2, &block.t2}) {
      m->weights.back() = rng.uniform_matrix(m->weights.back().rows(),
                                             m->weights.back().cols(), -0.05, 0.05);
      m->biases.back() = rng.uniform_matrix(1, m->biases.back().cols(), -0.05, 0.05);
    }
  }
};

// Runs grad_check for a scalar term defined by `build` over all model
// parameters (sampled components).
GradCheckReport check_term(Mini& mini,
                           const std::function<Var(Tape&, const FlowIkModel::Lifted&)>& build,
                           int components = 160) {
  std::vector<Mat> analytic;
  std::vector<Mat*> params = mini.model.param_ptrs();
  {
    Tape tape;
    auto vars = mini.model.lift(tape, true);
    Var loss = build(tape, vars);
    tape.backward(loss);
    for (Mat* p : params) analytic.push_back(tape.grad_by_storage(p));
  }
  auto loss_fn = [&] {
    Tape tape;
    auto vars = mini.model.lift(tape, false);
    return build(tape, vars).value()(0, 0);
  };
  Rng pick(123);
  return grad_check(loss_fn, params, analytic, 1e-4, 1e-5, pick, components);
}

}  // namespace

TEST_CASE("loss_inverse is zero at the ground truth and positive nearby") {
  Mini mini(ModelKind::one_stage);
  Tape tape;
  Var rot_gt = tape.input(mini.batch.rot_gt);
  Var zero = loss_inverse(tape, mini.tree, rot_gt, mini.batch.rot_gt, mini.batch.p_gt,
                          mini.bone_vecs);
  CHECK(zero.value()(0, 0) < 1e-12);
  // the quadratic rotation term is stationary at the ground truth (the L1
  // FK term sits at its kink, so only the quadratic part is asserted)
  Tape tq;
  Var at_gt = tq.input(mini.batch.rot_gt);
  tq.backward(sum_sq(sub(at_gt, tq.constant(mini.batch.rot_gt))));
  CHECK(at_gt.grad().cwiseAbs().maxCoeff() == 0.0);

  // a leaf-joint 6D offset leaves FK unchanged: the loss is delta^2 exactly
  Mat perturbed = mini.batch.rot_gt;
  const int leaf = 3;  // head
  const double delta = 0.25;
  perturbed(0, 6 * leaf) += delta;
  Tape tape2;
  Var lv = loss_inverse(tape2, mini.tree, tape2.input(perturbed), mini.batch.rot_gt,
                        mini.batch.p_gt, mini.bone_vecs);
  const double n = static_cast<double>(mini.batch.rot_gt.rows());
  CHECK(lv.value()(0, 0) == doctest::Approx(delta * delta / n).epsilon(1e-9));
}

TEST_CASE("loss_forward pins the documented unit cases") {
  Tape tape;
  Mat p = Mat::Zero(1, 48), phi = Mat::Zero(1, 30);
  CHECK(loss_forward(tape, tape.constant(p), tape.constant(phi), p, phi).value()(0, 0) == 0.0);
  Mat p2 = p;
  p2(0, 5) += 0.001;
  CHECK(loss_forward(tape, tape.constant(p2), tape.constant(phi), p, phi).value()(0, 0) ==
        doctest::Approx(0.001).epsilon(1e-12));
  Mat phi2 = phi;
  phi2(0, 3) += 0.1;
  CHECK(loss_forward(tape, tape.constant(p), tape.constant(phi2), p, phi).value()(0, 0) ==
        doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("mmd basics: identical sets, symmetry, separation") {
  Rng rng(5);
  MmdKernel kernel;
  const std::vector<double> bw = {1.0, 2.0};
  Mat x = rng.normal_matrix(32, 4);
  CHECK(std::abs(mmd_estimate(x, x, kernel, bw)) < 1e-12);
  Mat y = rng.normal_matrix(32, 4);
  CHECK(mmd_estimate(x, y, kernel, bw) ==
        doctest::Approx(mmd_estimate(y, x, kernel, bw)).epsilon(1e-12));

  // same-distribution baseline over 20 seeds vs a 5-sigma mean shift
  double baseline = 0.0;
  for (int s = 0; s < 20; ++s) {
    Rng r(100 + s);
    baseline = std::max(baseline, mmd_estimate(r.normal_matrix(256, 4),
                                               r.normal_matrix(256, 4), kernel,
                                               {0.5, 1.0, 2.0, 4.0, 8.0}));
  }
  Rng r(11);
  Mat a = r.normal_matrix(256, 4);
  Mat b = r.normal_matrix(256, 4);
  b.array() += 5.0;
  const double shifted = mmd_estimate(a, b, kernel, {0.5, 1.0, 2.0, 4.0, 8.0});
  CHECK(shifted > 10.0 * baseline);
}

TEST_CASE("mmd against a hand-computed two-point value") {
  // X = {a, a}, Y = {b, b}, single gaussian bandwidth h:
  // mean kXX = mean kYY = 1, mean kXY = exp(-d2 / (2 h^2))
  Mat x(2, 1), y(2, 1);
  x << 1.0, 1.0;
  y << 3.0, 3.0;
  MmdKernel kernel;
  const double h = 2.0;
  const double expected = 2.0 - 2.0 * std::exp(-4.0 / (2.0 * h * h));
  CHECK(mmd_estimate(x, y, kernel, {h}) == doctest::Approx(expected).epsilon(1e-12));

  // inverse multiquadric: k = h^2 / (h^2 + d2)
  MmdKernel imq;
  imq.family = MmdKernel::Family::inverse_multiquadric;
  const double expected_imq = 2.0 - 2.0 * (h * h / (h * h + 4.0));
  CHECK(mmd_estimate(x, y, imq, {h}) == doctest::Approx(expected_imq).epsilon(1e-12));
}

TEST_CASE("mmd tape gradient matches finite differences for both kernels") {
  Rng rng(6);
  for (auto family : {MmdKernel::Family::gaussian_mixture,
                      MmdKernel::Family::inverse_multiquadric}) {
    MmdKernel kernel;
    kernel.family = family;
    const std::vector<double> bw = {0.7, 1.3};
    Mat x0 = rng.normal_matrix(6, 3);
    const Mat y = rng.normal_matrix(8, 3);

    Tape tape;
    Var x = tape.param(&x0);
    Var loss = mmd_estimate(x, y, kernel, bw);
    tape.backward(loss);
    std::vector<Mat> analytic = {x.grad()};
    auto loss_fn = [&] { return mmd_estimate(x0, y, kernel, bw); };
    Rng pick(7);
    auto report = grad_check(loss_fn, {&x0}, analytic, 1e-4, 1e-6, pick);
    CHECK(report.pass);
  }
}

TEST_CASE("loss_independence separates dependent latents from independent ones") {
  Rng rng(8);
  KinematicTree tree = KinematicTree::default_humanoid();
  NoiseConfig noise;
  Dataset data = generate_dataset(tree, noise, 42, 64);
  std::vector<int> idx;
  for (int i = 0; i < 64; ++i) idx.push_back(i);
  BatchView batch = make_batch(tree, data, idx);
  MmdKernel kernel;

  // independent: joint = [rot_gt, fresh z]
  Tape tape;
  Var rot = tape.constant(batch.rot_gt);
  Rng zrng(9);
  Var z_indep = tape.constant(zrng.normal_matrix(64, 32));
  Rng lrng(10);
  const double indep =
      loss_independence(tape, rot, z_indep, batch.rot_gt, lrng, kernel).value()(0, 0);

  // dependent: z is a copy of the first rotation coordinates
  Var z_dep = tape.constant(batch.rot_gt.leftCols(32));
  Rng lrng2(10);
  const double dep =
      loss_independence(tape, rot, z_dep, batch.rot_gt, lrng2, kernel).value()(0, 0);
  CHECK(dep > 5.0 * std::max(indep, 1e-6));

  // identical joint and product matrices give exactly zero
  Mat product(64, 128);
  product.leftCols(96) = batch.rot_gt;
  Rng zr(11);
  product.rightCols(32) = zr.normal_matrix(64, 32);
  std::vector<double> bw;
  for (double s : kernel.bandwidth_scales) bw.push_back(s * median_pairwise_distance(product));
  Tape t2;
  CHECK(std::abs(mmd_estimate(t2.constant(product), product, kernel, bw).value()(0, 0)) <
        1e-12);

  bool warn = false;
  Tape t3;
  loss_independence(t3, t3.constant(batch.rot_gt.topRows(4)),
                    t3.constant(Mat::Zero(4, 32)), batch.rot_gt.topRows(4), lrng, kernel,
                    &warn);
  CHECK(warn);  // batch below 8: warned, still computed
}

TEST_CASE("boundary losses: perfect pass gives zero, unit latent gives one") {
  Mini mini(ModelKind::one_stage, 4);
  Tape tape;
  FlowIkModel::IkOut fake;
  fake.rot = tape.constant(mini.batch.rot_gt);
  fake.z = tape.constant(Mat::Zero(4, 32));
  CHECK(boundary_inverse_term(tape, fake, mini.batch.rot_gt).value()(0, 0) == 0.0);
  // one unit latent row -> 1/n
  Mat z = Mat::Zero(4, 32);
  z(0, 0) = 1.0;
  fake.z = tape.constant(z);
  CHECK(boundary_inverse_term(tape, fake, mini.batch.rot_gt).value()(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-12));

  FlowIkModel::FkOut ffk;
  ffk.p = tape.constant(mini.batch.p_gt);
  ffk.phi = tape.constant(mini.batch.twists_gt);
  CHECK(boundary_forward_term(tape, ffk, mini.batch.p_gt, mini.batch.twists_gt).value()(0, 0) ==
        0.0);
  Mat p = mini.batch.p_gt;
  p(0, 0) += 0.001;  // 1 mm in one coordinate
  ffk.p = tape.constant(p);
  CHECK(boundary_forward_term(tape, ffk, mini.batch.p_gt, mini.batch.twists_gt).value()(0, 0) ==
        doctest::Approx(0.001 / 4.0).epsilon(1e-9));

  // the real passes produce finite positive values on an untrained model
  auto real = loss_boundary_inverse(tape, mini.model, mini.model.lift(tape, false),
                                    mini.batch.p_gt, mini.batch.twists_gt, mini.ones,
                                    mini.batch.beta, mini.batch.rot_gt);
  CHECK(std::isfinite(real.loss.value()(0, 0)));
  CHECK(real.loss.value()(0, 0) > 0.0);
}

TEST_CASE("loss_swing unit cases") {
  Tape tape;
  Mat a = Mat::Zero(2, 96);
  CHECK(loss_swing(tape, tape.constant(a), a).value()(0, 0) == 0.0);
  Mat b = a;
  b(1, 10) = 0.5;
  CHECK(loss_swing(tape, tape.constant(b), a).value()(0, 0) ==
        doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("total_loss combines weighted terms and rejects NaN") {
  Tape tape;
  LossTerms terms;
  terms.inverse = tape.scalar(1.0);
  terms.forward = tape.scalar(1.0);
  terms.independence = tape.scalar(1.0);
  terms.boundary_inverse = tape.scalar(1.0);
  terms.boundary_forward = tape.scalar(1.0);
  LossWeights w;  // published values: 1, 1, 1, 0.1, 1
  CHECK(total_loss(tape, terms, w).value()(0, 0) == doctest::Approx(4.1).epsilon(1e-12));

  LossTerms zeros;
  zeros.inverse = tape.scalar(0.0);
  CHECK(total_loss(tape, zeros, w).value()(0, 0) == 0.0);

  // doubling an active weight doubles that term's gradient contribution
  Mat x0 = Mat::Constant(1, 1, 2.0);
  Tape t1;
  Var x1 = t1.param(&x0);
  LossTerms lt1;
  lt1.independence = sum_sq(x1);
  LossWeights w1;
  t1.backward(total_loss(t1, lt1, w1));
  Tape t2;
  Var x2 = t2.param(&x0);
  LossTerms lt2;
  lt2.independence = sum_sq(x2);
  LossWeights w2;
  w2.independence = 2.0;
  t2.backward(total_loss(t2, lt2, w2));
  CHECK(x2.grad()(0, 0) == doctest::Approx(2.0 * x1.grad()(0, 0)).epsilon(1e-12));

  LossTerms bad;
  bad.inverse = tape.scalar(std::nan(""));
  CHECK_THROWS_AS(total_loss(tape, bad, w), std::runtime_error);
}

// The acceptance-grade gradient battery on width-8 miniature models: every
// loss term against central finite differences.
TEST_CASE("gradient battery: every loss term passes FD checks on a mini model") {
  for (ModelKind kind : {ModelKind::one_stage, ModelKind::twist_and_swing}) {
    Mini mini(kind);
    auto ik_pass = [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      return mini.model.ik(tape, vars, tape.constant(mini.batch.p_obs),
                           tape.constant(mini.batch.twists_obs),
                           tape.constant(mini.batch.confidence), tape.constant(mini.batch.beta));
    };

    // Eq-7-style inverse loss (rotation + FK terms)
    auto inverse_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      return loss_inverse(tape, mini.tree, ik_pass(tape, vars).rot, mini.batch.rot_gt,
                          mini.batch.p_gt, mini.bone_vecs);
    });
    INFO("inverse worst ", inverse_report.worst_rel_err, " at ",
         inverse_report.worst_location);
    CHECK(inverse_report.pass);

    // forward reconstruction loss through f(R_gt, latents). The latents
    // are a stop-gradient constant by design, so the FD oracle must hold
    // them fixed: freeze the unperturbed inverse-pass values once.
    const auto frozen = mini.model.ik_eval(mini.batch.p_obs, mini.batch.twists_obs,
                                           mini.batch.confidence, mini.batch.beta);
    auto forward_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      Var z_det = tape.constant(frozen.z);
      Var z_sw_det =
          mini.model.has_swing_stage() ? tape.constant(frozen.z_swing) : Var();
      auto fwd = mini.model.fk(tape, vars, tape.constant(mini.batch.rot_gt), z_det, z_sw_det,
                               tape.constant(mini.batch.beta));
      return loss_forward(tape, fwd.p, fwd.phi, mini.batch.p_obs, mini.batch.twists_obs);
    });
    CHECK(forward_report.pass);

    // forward-direction swing supervision against the frozen inverse swing
    if (mini.model.has_swing_stage()) {
      auto fwd_swing_report =
          check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
            Var z_det = tape.constant(frozen.z);
            Var z_sw_det = tape.constant(frozen.z_swing);
            auto fwd = mini.model.fk(tape, vars, tape.constant(mini.batch.rot_gt), z_det,
                                     z_sw_det, tape.constant(mini.batch.beta));
            return loss_swing(tape, fwd.swing, frozen.swing);
          });
      CHECK(fwd_swing_report.pass);
    }

    // independence (MMD) with a fixed product sample
    auto independence_report =
        check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
          auto inv = ik_pass(tape, vars);
          Rng rng(55);  // fixed so FD re-evaluations see the same draw
          MmdKernel kernel;
          return loss_independence(tape, inv.rot, inv.z, mini.batch.rot_gt, rng, kernel);
        });
    CHECK(independence_report.pass);

    // inverse boundary
    auto bi_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      auto pass = mini.model.ik(tape, vars, tape.constant(mini.batch.p_gt),
                                tape.constant(mini.batch.twists_gt), tape.constant(mini.ones),
                                tape.constant(mini.batch.beta));
      return boundary_inverse_term(tape, pass, mini.batch.rot_gt);
    });
    CHECK(bi_report.pass);

    // forward boundary
    auto bf_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      Var zero = tape.constant(Mat::Zero(mini.batch.rot_gt.rows(), 32));
      Var zero_sw = mini.model.has_swing_stage()
                        ? tape.constant(Mat::Zero(mini.batch.rot_gt.rows(), 32))
                        : Var();
      auto pass = mini.model.fk(tape, vars, tape.constant(mini.batch.rot_gt), zero, zero_sw,
                                tape.constant(mini.batch.beta));
      return boundary_forward_term(tape, pass, mini.batch.p_gt, mini.batch.twists_gt);
    });
    CHECK(bf_report.pass);

    // swing supervision and padding penalty (twist-and-swing only for swing)
    if (mini.model.has_swing_stage()) {
      auto swing_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
        return loss_swing(tape, ik_pass(tape, vars).swing, mini.batch.swing_gt);
      });
      CHECK(swing_report.pass);
    }
    auto pad_report = check_term(mini, [&](Tape& tape, const FlowIkModel::Lifted& vars) {
      Var zero = tape.constant(Mat::Zero(mini.batch.rot_gt.rows(), 32));
      Var zero_sw = mini.model.has_swing_stage()
                        ? tape.constant(Mat::Zero(mini.batch.rot_gt.rows(), 32))
                        : Var();
      auto pass = mini.model.fk(tape, vars, tape.constant(mini.batch.rot_gt), zero, zero_sw,
                                tape.constant(mini.batch.beta));
      return loss_padding(tape, pass.pads);
    });
    CHECK(pad_report.pass);
  }
}
