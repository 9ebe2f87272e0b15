#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "pnmm/errors.hpp"
#include "pnmm/objective.hpp"
#include "support.hpp"

using namespace pnmm;
using namespace pnmm::test;

TEST_SUITE("objective") {

TEST_CASE("block gradients match central differences on 100 random instances") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 pick(seed);
    const Index L = 2 + Index(pick() % 7), K = 2 + Index(pick() % 2), V = 1 + Index(pick() % 2);
    const GridDims dims{int(1 + pick() % 5), 2, 1};
    const GradientCheck c = check_all_gradients(random_instance(1000 + seed, L, dims, K, V));
    INFO("seed " << seed << " block " << c.block);
    CHECK(c.worst <= 1e-5);
    worst = std::max(worst, c.worst);
  }
  MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("small fixed instance L=6 N=5 K=3 V=2") {
  const GradientCheck c = check_all_gradients(random_instance(77, 6, {5, 1, 1}, 3, 2));
  CHECK(c.worst <= 1e-5);
}

TEST_CASE("objective terms") {
  const Instance in = random_instance(5, 5, {3, 2, 1}, 3, 2);
  const PnmmObjective obj = objective_of(in);
  const ObjectiveTerms t = obj.evaluate(in.v);
  const Matrix X = reconstruct(in.v.M, in.v.A, in.v.B, in.v.alpha, in.timeline);
  CHECK(t.data == doctest::Approx(0.5 * (in.Y - X).squaredNorm()).epsilon(1e-12));
  CHECK(t.anchor == doctest::Approx(0.5 * (in.v.M - in.M0).squaredNorm()).epsilon(1e-12));
  double sp = 0.0;
  for (const auto& B : in.v.B)
    for (Index n = 0; n < B.cols(); ++n) sp += B.col(n).norm();
  CHECK(t.sparsity == doctest::Approx(sp).epsilon(1e-12));
  CHECK(t.smoothness == doctest::Approx(obj.spatial().penalty(in.v.A)).epsilon(1e-12));
  const double total = t.data + in.cfg.eta * t.smoothness + in.cfg.beta * t.anchor + in.cfg.lambda * t.sparsity;
  CHECK(t.total == doctest::Approx(total).epsilon(1e-12));
  CHECK(obj.smooth_value(in.v) == doctest::Approx(total - in.cfg.lambda * t.sparsity).epsilon(1e-12));
  CHECK((obj.residual(in.v) - (in.Y - X)).norm() <= 1e-12 * X.norm());
}

TEST_CASE("evaluate rejects infeasible states") {
  Instance in = random_instance(6, 4, {3, 1, 1}, 3, 1);
  const PnmmObjective obj = objective_of(in);
  CHECK_NOTHROW(obj.check_feasible(in.v));
  Variables bad = in.v;
  bad.A(0, 0) += 0.1;
  CHECK_THROWS_AS(obj.evaluate(bad), NumericalError);
  bad = in.v;
  bad.M(0, 0) = -1.0;
  CHECK_THROWS_AS(obj.evaluate(bad), NumericalError);
  bad = in.v;
  bad.B[0](0, 0) = 0.9;
  CHECK_THROWS_AS(obj.evaluate(bad), NumericalError);
  bad = in.v;
  bad.alpha(0, 0) = 10.0;
  CHECK_THROWS_AS(obj.evaluate(bad), NumericalError);
  bad = in.v;
  bad.B.pop_back();
  CHECK_THROWS_AS(obj.evaluate(bad), DomainError);
}

TEST_CASE("block Lipschitz constants bound the observed curvature") {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Instance in = random_instance(500 + seed, 7, {3, 3, 1}, 3, 2);
    const PnmmObjective obj = objective_of(in);
    const auto f = [&](const Variables& x) { return obj.smooth_value(x); };
    const Index L = in.v.M.rows(), K = in.v.M.cols(), N = in.v.A.cols(), T = K - 1;
    const double slack = 1.0 + 1e-6;

    for (int d = 0; d < 10; ++d) {
      for (Index k = 0; k < K; ++k) {
        Vector dir = random_matrix(rng, L, 1, -1, 1);
        dir.normalize();
        const double c = curvature(f, in.v, [&](Variables& x, double t) { x.M.col(k) += t * dir; });
        CHECK(c <= obj.grad_m(in.v, k).lipschitz * slack + 1e-8);
      }
      {
        Matrix dir = random_matrix(rng, K, N, -1, 1);
        dir /= dir.norm();
        const MatrixGradient g = obj.grad_a(in.v);
        CHECK(curvature(f, in.v, [&](Variables& x, double t) { x.A += t * dir; }) <= g.lipschitz * slack + 1e-8);
        const Index n = Index(rng() % std::uint64_t(N));
        Vector cd = random_matrix(rng, K, 1, -1, 1);
        cd.normalize();
        CHECK(curvature(f, in.v, [&](Variables& x, double t) { x.A.col(n) += t * cd; }) <=
              g.column_lipschitz[n] * slack + 1e-8);
        CHECK(g.column_lipschitz.maxCoeff() <= g.lipschitz * slack);
      }
      for (Index i = 0; i < Index(in.v.B.size()); ++i) {
        Matrix dir = random_matrix(rng, T, N, -1, 1);
        dir /= dir.norm();
        const MatrixGradient g = obj.grad_b(in.v, i);
        CHECK(curvature(f, in.v, [&](Variables& x, double t) { x.B[std::size_t(i)] += t * dir; }) <=
              g.lipschitz * slack + 1e-8);
        const Index n = Index(rng() % std::uint64_t(N));
        Vector cd = random_matrix(rng, T, 1, -1, 1);
        cd.normalize();
        CHECK(curvature(f, in.v, [&](Variables& x, double t) { x.B[std::size_t(i)].col(n) += t * cd; }) <=
              g.column_lipschitz[n] * slack + 1e-8);
      }
    }
    for (Index i = 0; i < in.v.alpha.cols(); ++i)
      for (Index k = 0; k < T; ++k) {
        const ScalarGradient g = obj.grad_alpha(in.v, k, i + 1);
        const Interval b = in.cfg.alpha_bounds[std::size_t(i)];
        CHECK(g.floor >= b.lo);
        CHECK(g.floor <= in.v.alpha(k, i));
        for (int s = 0; s <= 20; ++s) {
          Variables at = in.v;
          at.alpha(k, i) = g.floor + (b.hi - g.floor) * s / 20.0;
          const double c = curvature(f, at, [&](Variables& x, double t) { x.alpha(k, i) += t; }, 1e-4);
          CHECK(c <= g.lipschitz * (1.0 + 1e-4) + 1e-6);
        }
      }
  }
}

TEST_CASE("largest eigenvalue of small PSD matrices") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + Index(rng() % 6);
    const Matrix R = random_matrix(rng, n, n + 2, -1, 1);
    const Matrix H = R * R.transpose();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const double ref = es.eigenvalues().maxCoeff();
    CHECK(max_eigenvalue_psd(H) >= ref * (1 - 1e-12));
    CHECK(max_eigenvalue_psd(H) <= ref * (1 + 1e-8) + 1e-12);
  }
  CHECK(max_eigenvalue_psd(Matrix::Zero(3, 3)) >= 0.0);
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.eta = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.b_bounds.pop_back();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alpha_bounds[0].lo = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

}  // TEST_SUITE
