#include <doctest.h>

#include <cmath>
#include <limits>

#include "pnmm/depict.hpp"
#include "pnmm/errors.hpp"
#include "pnmm/phantom.hpp"
#include "support.hpp"

using namespace pnmm;

namespace {

struct Reference {
  AcquisitionTimeline tl;
  Vector m_R;
};

Reference reference() {
  PhantomConfig pc;
  Reference r{pc.timeline(), Vector()};
  r.m_R = generate_factor_tacs(pc, r.tl).col(0);
  return r;
}

}  // namespace

TEST_SUITE("depict") {

TEST_CASE("logarithmic rate grid") {
  const Vector r = log_rates(0.03, 6.0, 30);
  REQUIRE(r.size() == 30);
  CHECK(r[0] == 0.03);
  CHECK(r[29] == 6.0);
  for (Index j = 1; j < 30; ++j) {
    CHECK(r[j] > r[j - 1]);
    CHECK(std::log(r[j] / r[j - 1]) == doctest::Approx(std::log(200.0) / 29.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(log_rates(0.0, 6.0, 30), DomainError);
  CHECK_THROWS_AS(log_rates(1.0, 0.5, 30), DomainError);
}

TEST_CASE("basis has an offset column plus one column per rate") {
  const Reference ref = reference();
  const BasisGrid g = make_basis(0.03, 6.0, 30, ref.m_R, ref.tl);
  CHECK(g.D.cols() == 31);
  CHECK(g.D.col(0) == ref.m_R);
  const Vector col = conv_operator(exp_basis(g.rates[4], ref.tl)).apply(ref.m_R);
  CHECK((g.D.col(5) - col).norm() == 0.0);
  CHECK_THROWS_AS(make_basis(0.03, 6.0, 30, Vector::Ones(3), ref.tl), DomainError);
}

TEST_CASE("noiseless inverse crime on one grid column") {
  const Reference ref = reference();
  DepictConfig cfg;
  cfg.tolerance = 0.0;
  cfg.max_iters = 200000;
  const DepictSolver solver(make_basis(0.03, 6.0, 30, ref.m_R, ref.tl), cfg);
  const double c = 0.05;
  const Vector x = ref.m_R + c * solver.grid().D.col(1);
  const auto fit = solver.fit(x, 0.0);
  CHECK(std::abs(fit.coeffs[1] - c) <= 1e-6);
  CHECK(fit.coeffs.tail(29).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(fit.coeffs[0]) <= 1e-6);
}

TEST_CASE("objective is monotone over iterations") {
  const Reference ref = reference();
  DepictConfig cfg;
  cfg.max_iters = 3000;
  const DepictSolver solver(make_basis(0.03, 6.0, 30, ref.m_R, ref.tl), cfg);
  const GunnCoefficients g = frtm_to_gunn(1.3, 0.4, 0.15, 0.01);
  Vector x = (1.0 + g.b0) * ref.m_R;
  x += g.b_fast * conv_operator(exp_basis(g.alpha_fast, ref.tl)).apply(ref.m_R);
  x += g.b_slow * conv_operator(exp_basis(g.alpha_slow, ref.tl)).apply(ref.m_R);
  const auto fit = solver.fit(x, -1.0, true);
  REQUIRE(!fit.trace.empty());
  const Vector r = x - ref.m_R;
  double prev = solver.objective(r, Vector::Zero(31), fit.lambda);
  for (double v : fit.trace) {
    CHECK(v <= prev + 1e-12 * std::abs(prev));
    prev = v;
  }
  CHECK(fit.objective == doctest::Approx(solver.objective(r, fit.coeffs, fit.lambda)).epsilon(1e-12));
}

TEST_CASE("regularization rule and constraints") {
  const Reference ref = reference();
  DepictConfig cfg;
  const DepictSolver solver(make_basis(0.03, 6.0, 30, ref.m_R, ref.tl), cfg);
  const Vector x = 1.4 * ref.m_R;
  const auto fit = solver.fit(x);
  const double expected = 1e-4 * (solver.grid().D.transpose() * (x - ref.m_R)).cwiseAbs().maxCoeff();
  CHECK(fit.lambda == doctest::Approx(expected).epsilon(1e-14));
  CHECK(fit.coeffs[0] >= 0.0);
  CHECK(fit.coeffs[0] <= 0.7);
  CHECK(fit.coeffs.tail(30).minCoeff() >= 0.0);

  cfg.lambda_abs = 2.5;
  CHECK(DepictSolver(solver.grid(), cfg).fit(x).lambda == 2.5);

  // below the reference: b0 stays at its lower bound, coefficients at zero
  const auto low = solver.fit(0.5 * ref.m_R);
  CHECK(low.coeffs.isZero(0.0));
}

TEST_CASE("binding potential from coefficients") {
  const Reference ref = reference();
  const DepictSolver solver(make_basis(0.03, 6.0, 30, ref.m_R, ref.tl), DepictConfig{});
  Vector c = Vector::Zero(31);
  c[0] = 0.2;
  c[1] = 0.06;
  c[30] = 1.2;
  CHECK(solver.bp(c) == doctest::Approx(0.2 + 0.06 / 0.03 + 1.2 / 6.0).epsilon(1e-14));
}

TEST_CASE("voxel maps, failures and thread independence") {
  const Reference ref = reference();
  DynamicImage img;
  img.timeline = ref.tl;
  img.dims = {4, 3, 1};
  img.data.resize(ref.tl.frames(), 12);
  for (Index n = 0; n < 12; ++n) img.data.col(n) = (1.0 + 0.05 * double(n)) * ref.m_R;
  img.data(3, 7) = std::numeric_limits<double>::quiet_NaN();

  DepictConfig cfg;
  cfg.threads = 1;
  const DepictMaps a = depict_bp_map(img, ref.m_R, cfg);
  cfg.threads = 4;
  const DepictMaps b = depict_bp_map(img, ref.m_R, cfg);
  CHECK(a.failures == 1);
  CHECK(std::isnan(a.bp[7]));
  CHECK(std::isnan(a.r1[7]));
  for (Index n = 0; n < 12; ++n) {
    if (n == 7) continue;
    CHECK(a.bp[n] == b.bp[n]);
    CHECK(a.r1[n] >= 1.0);
    CHECK(a.r1[n] <= 1.7);
  }
  CHECK_THROWS_AS(depict_bp_map(img, Vector::Ones(3), cfg), DomainError);
}

TEST_CASE("config validation") {
  DepictConfig cfg;
  cfg.rate_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_basis = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
