#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pnmm/objective.hpp"
#include "pnmm/palm.hpp"

namespace pnmm::test {

struct Instance {
  Matrix Y;
  GridDims dims;
  AcquisitionTimeline timeline;
  Matrix M0;
  SolverConfig cfg;
  Variables v;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double lo, double hi) {
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = uniform(rng, lo, hi);
  return m;
}

// Random feasible state with all coefficients strictly inside their bounds
// and rates away from the bounds, so central differences stay well defined.
inline Instance random_instance(std::uint64_t seed, Index L, GridDims dims, Index K, Index V) {
  std::mt19937_64 rng(seed);
  Instance in;
  in.dims = dims;
  const Index N = dims.voxels();
  std::vector<double> durations;
  for (Index l = 0; l < L; ++l) durations.push_back(uniform(rng, 0.5, 4.0));
  in.timeline = AcquisitionTimeline::from_durations(durations);

  in.cfg.eta = uniform(rng, 0.1, 1.0);
  in.cfg.beta = uniform(rng, 0.05, 0.5);
  in.cfg.lambda = uniform(rng, 0.1, 1.0);
  in.cfg.b_bounds.assign(std::size_t(V + 1), Interval{-0.5, 0.5});
  in.cfg.alpha_bounds.assign(std::size_t(V), Interval{0.01, 6.0});
  in.cfg.alpha_init.assign(std::size_t(V), 0.1);

  in.v.M = random_matrix(rng, L, K, 0.2, 2.0);
  in.v.A = random_matrix(rng, K, N, 0.05, 1.0);
  for (Index n = 0; n < N; ++n) in.v.A.col(n) /= in.v.A.col(n).sum();
  for (Index i = 0; i <= V; ++i) in.v.B.push_back(random_matrix(rng, K - 1, N, -0.4, 0.4));
  in.v.alpha = random_matrix(rng, K - 1, V, 0.05, 1.5);
  in.M0 = in.v.M + random_matrix(rng, L, K, -0.2, 0.2);
  in.Y = random_matrix(rng, L, N, 0.0, 3.0);
  return in;
}

inline PnmmObjective objective_of(const Instance& in) {
  return PnmmObjective(in.Y, in.dims, in.timeline, in.M0, in.cfg);
}

// Central differences of f over the entries selected by `entry`.
inline Vector central_differences(const std::function<double(const Variables&)>& f, const Variables& v,
                                  const std::function<double&(Variables&, Index)>& entry, Index count,
                                  double rel_step = 1e-6) {
  Vector g(count);
  for (Index j = 0; j < count; ++j) {
    Variables p = v, m = v;
    const double x = entry(p, j);
    const double h = rel_step * std::max(1.0, std::abs(x));
    entry(p, j) = x + h;
    entry(m, j) = x - h;
    g[j] = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

inline double rel_error(const Vector& a, const Vector& b) {
  const double denom = std::max(b.norm(), 1e-12);
  return (a - b).norm() / denom;
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

struct GradientCheck {
  double worst = 0.0;
  std::string block;
};

// Every block gradient of the smooth objective against central differences.
inline GradientCheck check_all_gradients(const Instance& in) {
  const PnmmObjective obj = objective_of(in);
  const auto f = [&](const Variables& x) { return obj.smooth_value(x); };
  GradientCheck out;
  auto record = [&](double e, const std::string& name) {
    if (e > out.worst) {
      out.worst = e;
      out.block = name;
    }
  };
  const Index L = in.v.M.rows(), K = in.v.M.cols(), N = in.v.A.cols();
  for (Index k = 0; k < K; ++k) {
    const Vector fd = central_differences(
        f, in.v, [k](Variables& x, Index j) -> double& { return x.M(j, k); }, L);
    record(rel_error(obj.grad_m(in.v, k).gradient, fd), "m" + std::to_string(k + 1));
  }
  {
    const Vector fd = central_differences(
        f, in.v, [K](Variables& x, Index j) -> double& { return x.A(j % K, j / K); }, K * N);
    const Matrix g = obj.grad_a(in.v).gradient;
    record(rel_error(Eigen::Map<const Vector>(g.data(), g.size()), fd), "A");
  }
  for (std::size_t i = 0; i < in.v.B.size(); ++i) {
    const Index T = K - 1;
    const Vector fd = central_differences(
        f, in.v, [i, T](Variables& x, Index j) -> double& { return x.B[i](j % T, j / T); }, T * N);
    const Matrix g = obj.grad_b(in.v, Index(i)).gradient;
    record(rel_error(Eigen::Map<const Vector>(g.data(), g.size()), fd), "B" + std::to_string(i));
  }
  for (Index i = 0; i < in.v.alpha.cols(); ++i)
    for (Index k = 0; k < in.v.alpha.rows(); ++k) {
      const Vector fd = central_differences(
          f, in.v, [k, i](Variables& x, Index) -> double& { return x.alpha(k, i); }, 1);
      record(rel_error(obj.grad_alpha(in.v, k, i + 1).gradient, fd[0]),
             "alpha" + std::to_string(k + 1) + std::to_string(i + 1));
    }
  return out;
}

// Second difference of f along d, divided by ||d||^2.
inline double curvature(const std::function<double(const Variables&)>& f, const Variables& v,
                        const std::function<void(Variables&, double)>& move, double t = 1e-3) {
  Variables p = v, m = v;
  move(p, t);
  move(m, -t);
  return (f(p) - 2.0 * f(v) + f(m)) / (t * t);
}

}  // namespace pnmm::test
