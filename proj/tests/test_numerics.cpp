#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "kinflow/mlp.hpp"
#include "kinflow/optim.hpp"
#include "kinflow/rng.hpp"

using namespace kinflow;
using ad::Mat;

TEST_CASE("rng streams are reproducible from seed") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(1234), d(1234);
  for (int i = 0; i < 1000; ++i) CHECK(c.normal() == d.normal());
  Mat m1 = Rng(7).normal_matrix(13, 5);
  Mat m2 = Rng(7).normal_matrix(13, 5);
  CHECK(m1 == m2);
}

TEST_CASE("rng substreams differ from the parent and each other") {
  Rng root(99);
  Rng s0 = root.substream(0);
  Rng s1 = root.substream(1);
  CHECK(s0.next_u64() != s1.next_u64());
  CHECK(Rng(99).substream(0).seed() == root.substream(0).seed());
}

TEST_CASE("standard normal sample statistics") {
  Rng rng(2024);
  const int n = 100000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var > 0.97);
  CHECK(var < 1.03);
}

TEST_CASE("uniform samples stay in range") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("mlp with zero parameters maps everything to zero") {
  Rng rng(1);
  for (auto act : {MlpParams::Output::identity, MlpParams::Output::tanh}) {
    MlpParams p = make_mlp(4, {8}, 3, act, rng);
    for (auto& w : p.weights) w.setZero();
    for (auto& b : p.biases) b.setZero();
    Mat x = Rng(2).normal_matrix(5, 4);
    CHECK(mlp_apply(p, x).isZero(0.0));
  }
}

TEST_CASE("one-layer mlp computes the affine map") {
  MlpParams p;
  p.weights.push_back(Mat::Constant(1, 1, 2.0));
  p.biases.push_back(Mat::Constant(1, 1, 1.0));
  p.validate();
  Mat x = Mat::Constant(1, 1, 3.0);
  CHECK(mlp_apply(p, x)(0, 0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("mlp rejects dimension mismatch") {
  Rng rng(1);
  MlpParams p = make_mlp(4, {8}, 3, MlpParams::Output::identity, rng);
  CHECK_THROWS_AS(mlp_apply(p, Mat::Zero(2, 5)), std::invalid_argument);
}

TEST_CASE("mlp evaluation is deterministic across threads") {
  Rng rng(3);
  MlpParams p = make_mlp(16, {32, 32}, 8, MlpParams::Output::tanh, rng);
  Mat x = Rng(4).normal_matrix(64, 16);
  Mat expected = mlp_apply(p, x);
  std::vector<Mat> results(4);
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t)
    workers.emplace_back([&, t] { results[static_cast<std::size_t>(t)] = mlp_apply(p, x); });
  for (auto& w : workers) w.join();
  for (const auto& r : results) CHECK(r == expected);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Mat p = Mat::Constant(2, 2, 1.5);
  Adam adam({&p}, {});
  const Mat before = p;
  for (int i = 0; i < 5; ++i) adam.step({Mat::Zero(2, 2)});
  CHECK(p == before);
  CHECK(adam.steps() == 5);
}

TEST_CASE("adam first step moves by about lr on f(x) = x^2") {
  // t=1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps) ~ lr
  Mat x = Mat::Constant(1, 1, 1.0);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam adam({&x}, cfg);
  adam.step({Mat::Constant(1, 1, 2.0)});
  CHECK(x(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam descends against a constant gradient") {
  Mat x = Mat::Constant(1, 1, 0.0);
  Adam adam({&x}, {});
  for (int i = 0; i < 50; ++i) adam.step({Mat::Constant(1, 1, 3.0)});
  CHECK(x(0, 0) < 0.0);
}

TEST_CASE("adam rejects non-finite gradients") {
  Mat x = Mat::Zero(1, 1);
  Adam adam({&x}, {});
  Mat bad = Mat::Constant(1, 1, std::nan(""));
  CHECK_THROWS_AS(adam.step({bad}), std::runtime_error);
}

TEST_CASE("gradient clipping caps the global norm") {
  std::vector<Mat> grads = {Mat::Constant(1, 1, 3.0), Mat::Constant(1, 1, 4.0)};
  CHECK(global_grad_norm(grads) == doctest::Approx(5.0));
  clip_global_norm(grads, 1.0);
  CHECK(global_grad_norm(grads) == doctest::Approx(1.0));
  clip_global_norm(grads, 10.0);  // below the bound: untouched
  CHECK(global_grad_norm(grads) == doctest::Approx(1.0));
}

TEST_CASE("grad_check validates analytic gradients and catches corrupt ones") {
  Mat x = Mat::Constant(1, 1, 3.0);
  auto loss = [&] { return x(0, 0) * x(0, 0); };
  std::vector<Mat> good = {Mat::Constant(1, 1, 6.0)};
  Rng rng(1);
  auto report = grad_check(loss, {&x}, good, 1e-4, 1e-5, rng);
  CHECK(report.pass);
  CHECK(report.worst_rel_err < 1e-4);

  std::vector<Mat> corrupt = {Mat::Constant(1, 1, 12.0)};
  auto bad = grad_check(loss, {&x}, corrupt, 1e-4, 1e-5, rng);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("grad_check passes vacuously with no parameters") {
  Rng rng(1);
  auto report = grad_check([] { return 1.0; }, {}, {}, 1e-4, 1e-5, rng);
  CHECK(report.pass);
  CHECK(report.components_checked == 0);
}
