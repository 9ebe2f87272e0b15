#include "pnmm/depict.hpp"

#include <omp.h>

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "pnmm/errors.hpp"

namespace pnmm {

void DepictConfig::validate() const {
  if (!(rate_min > 0.0 && rate_max > rate_min)) throw ConfigError("depict: need 0 < rate_min < rate_max");
  if (n_basis < 1) throw ConfigError("depict: n_basis must be >= 1");
  if (!(b0_bounds.lo <= b0_bounds.hi)) throw ConfigError("depict: empty b0 bounds");
  if (!(coeff_bounds.lo <= coeff_bounds.hi)) throw ConfigError("depict: empty coefficient bounds");
  if (!(tolerance >= 0.0) || max_iters < 1) throw ConfigError("depict: invalid stopping rule");
  if (!(lambda_rel >= 0.0)) throw ConfigError("depict: lambda_rel must be nonnegative");
}

Vector log_rates(double rate_min, double rate_max, int n_basis) {
  if (!(rate_min > 0.0 && rate_max > rate_min) || n_basis < 1)
    throw DomainError("log_rates: need 0 < rate_min < rate_max and n_basis >= 1");
  Vector r(n_basis);
  if (n_basis == 1) {
    r[0] = rate_min;
    return r;
  }
  const double ratio = std::log(rate_max / rate_min);
  for (int j = 0; j < n_basis; ++j) r[j] = rate_min * std::exp(ratio * double(j) / double(n_basis - 1));
  r[n_basis - 1] = rate_max;
  return r;
}

BasisGrid make_basis(double rate_min, double rate_max, int n_basis, const Vector& m_R,
                     const AcquisitionTimeline& timeline) {
  if (m_R.size() != timeline.frames()) throw DomainError("make_basis: reference TAC length != frame count");
  if (!m_R.allFinite()) throw DomainError("make_basis: reference TAC is not finite");
  BasisGrid g;
  g.rates = log_rates(rate_min, rate_max, n_basis);
  g.D.resize(m_R.size(), n_basis + 1);
  g.D.col(0) = m_R;
  for (int j = 0; j < n_basis; ++j) g.D.col(j + 1) = conv_operator(exp_basis(g.rates[j], timeline)).apply(m_R);
  return g;
}

DepictSolver::DepictSolver(BasisGrid grid, DepictConfig cfg) : grid_(std::move(grid)), cfg_(std::move(cfg)) {
  cfg_.validate();
  gram_ = grid_.D.transpose() * grid_.D;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram_, Eigen::EigenvaluesOnly);
  lipschitz_ = es.eigenvalues().maxCoeff();
}

double DepictSolver::objective(const Vector& r, const Vector& c, double lambda) const {
  return 0.5 * (r - grid_.D * c).squaredNorm() + lambda * c.tail(c.size() - 1).cwiseAbs().sum();
}

double DepictSolver::bp(const Vector& c) const {
  return c[0] + (c.tail(grid_.basis()).array() / grid_.rates.array()).sum();
}

Vector DepictSolver::prox(const Vector& z, double t) const {
  Vector out(z.size());
  out[0] = cfg_.b0_bounds.clamp(z[0]);
  for (Index j = 1; j < z.size(); ++j) {
    const double s = z[j] > t ? z[j] - t : (z[j] < -t ? z[j] + t : 0.0);
    out[j] = cfg_.coeff_bounds.clamp(s);
  }
  return out;
}

DepictSolver::Fit DepictSolver::fit(const Vector& x, double lambda, bool keep_trace) const {
  if (x.size() != grid_.D.rows()) throw DomainError("depict_fit: TAC length != basis length");
  if (!x.allFinite()) throw DomainError("depict_fit: TAC is not finite");

  const Vector r = x - grid_.D.col(0);
  const Vector Dtr = grid_.D.transpose() * r;
  if (lambda < 0.0) lambda = cfg_.lambda_abs >= 0.0 ? cfg_.lambda_abs : cfg_.lambda_rel * Dtr.cwiseAbs().maxCoeff();

  Fit f;
  f.lambda = lambda;
  const Index P = grid_.D.cols();
  f.coeffs = prox(Vector::Zero(P), 0.0);
  f.objective = objective(r, f.coeffs, lambda);
  if (lipschitz_ <= 0.0) {
    f.converged = true;
    return f;
  }

  // Monotone FISTA: keep the better of the prox point and the previous iterate.
  const double step = 1.0 / lipschitz_;
  Vector y = f.coeffs;
  Vector x_prev = f.coeffs;
  double t = 1.0;
  for (int it = 1; it <= cfg_.max_iters; ++it) {
    const Vector grad = gram_ * y - Dtr;
    const Vector z = prox(y - step * grad, step * lambda);
    const double Fz = objective(r, z, lambda);
    const double prev = f.objective;
    const bool accept = Fz <= prev;
    if (accept) {
      f.coeffs = z;
      f.objective = Fz;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = f.coeffs + (t / t_next) * (z - f.coeffs) + ((t - 1.0) / t_next) * (f.coeffs - x_prev);
    x_prev = f.coeffs;
    t = t_next;
    f.iterations = it;
    if (keep_trace) f.trace.push_back(f.objective);

    if (f.objective == 0.0) {
      f.converged = true;
      break;
    }
    if (accept && std::abs(prev - f.objective) <= cfg_.tolerance * prev) {
      f.converged = true;
      break;
    }
  }
  return f;
}

DepictMaps depict_bp_map(const DynamicImage& image, const Vector& m_R, const DepictConfig& cfg) {
  cfg.validate();
  if (m_R.size() != image.timeline.frames()) throw DomainError("depict_bp_map: reference TAC length != frame count");
  const DepictSolver solver(make_basis(cfg.rate_min, cfg.rate_max, cfg.n_basis, m_R, image.timeline), cfg);

  const Index N = image.data.cols();
  DepictMaps maps;
  maps.bp.resize(N);
  maps.r1.resize(N);
  Index failures = 0;
  const int saved = omp_get_max_threads();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : failures)
  for (Index n = 0; n < N; ++n) {
    const Vector x = image.data.col(n);
    if (!x.allFinite()) {
      maps.bp[n] = maps.r1[n] = std::numeric_limits<double>::quiet_NaN();
      ++failures;
      continue;
    }
    const auto f = solver.fit(x);
    maps.bp[n] = solver.bp(f.coeffs);
    maps.r1[n] = 1.0 + f.coeffs[0];
  }
  if (cfg.threads > 0) omp_set_num_threads(saved);
  maps.failures = failures;
  if (failures > 0) spdlog::warn("depict: {} voxel(s) could not be fitted and are NaN", failures);
  return maps;
}

}  // namespace pnmm
