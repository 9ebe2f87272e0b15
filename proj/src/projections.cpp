#include "pnmm/projections.hpp"

#include <algorithm>
#include <cmath>

#include "pnmm/errors.hpp"

namespace pnmm {

Matrix project_nonneg(const Matrix& M) { return M.cwiseMax(0.0); }

Vector project_simplex(const Vector& v) {
  const Index K = v.size();
  if (K < 1) throw DomainError("project_simplex: empty vector");

  // Active-set iteration: the threshold only grows, and the
  // active set only shrinks, so it stops after at most K passes.
  std::vector<bool> active(std::size_t(K), true);
  Index count = K;
  double tau = (v.sum() - 1.0) / double(K);
  for (;;) {
    Index next = 0;
    double sum = 0.0;
    for (Index k = 0; k < K; ++k) {
      if (active[std::size_t(k)] && v[k] > tau) {
        ++next;
        sum += v[k];
      } else {
        active[std::size_t(k)] = false;
      }
    }
    if (next == count) break;
    count = next;
    tau = (sum - 1.0) / double(count);
  }

  Vector x(K);
  for (Index k = 0; k < K; ++k) x[k] = active[std::size_t(k)] ? v[k] - tau : 0.0;
  return x;
}

Matrix project_simplex_columns(const Matrix& A) {
  Matrix out(A.rows(), A.cols());
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < A.cols(); ++n) out.col(n) = project_simplex(A.col(n));
  return out;
}

namespace {

// Exact minimizer of 0.5 ||z - v||^2 + t ||z|| over the box. The optimality
// conditions give z = clamp(c v) with c = r / (r + t), r = ||z||, and
// g(c) = ||clamp(c v)|| (1 - c) - c t is decreasing in c, so c is found by
// bisection once the closed form is ruled out.
template <class Col>
void prox_column(Col&& z, double t, const Interval& b) {
  const Vector v = z;
  auto clamped = [&](double c) { return (c * v).cwiseMax(b.lo).cwiseMin(b.hi).eval(); };
  if (t == 0.0) {
    z = clamped(1.0);
    return;
  }
  // tangent cone of the box at 0: coordinates with a zero bound keep one sign
  double cone = 0.0;
  for (Index j = 0; j < v.size(); ++j) {
    const double u = std::clamp(v[j], b.lo < 0.0 ? -HUGE_VAL : 0.0, b.hi > 0.0 ? HUGE_VAL : 0.0);
    cone += u * u;
  }
  if (std::sqrt(cone) <= t) {
    z.setZero();
    return;
  }
  const double norm = v.norm();
  const double c1 = 1.0 - t / norm;
  if (c1 > 0.0 && (c1 * v).minCoeff() >= b.lo && (c1 * v).maxCoeff() <= b.hi) {
    z = c1 * v;
    return;
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (lo + hi);
    if (c <= lo || c >= hi) break;
    if (clamped(c).norm() * (1.0 - c) - c * t > 0.0)
      lo = c;
    else
      hi = c;
  }
  z = clamped(0.5 * (lo + hi));
}

}  // namespace

Matrix prox_group_box(const Matrix& B, double threshold, const Interval& bounds) {
  if (!(bounds.lo <= 0.0 && bounds.hi >= 0.0))
    throw ConfigError("prox_group_box: coefficient bounds must contain 0");
  if (!(threshold >= 0.0)) throw DomainError("prox_group_box: threshold must be nonnegative");

  Matrix out = B;
  for (Index n = 0; n < out.cols(); ++n) prox_column(out.col(n), threshold, bounds);
  return out;
}

Matrix prox_group_box_columns(const Matrix& B, const Vector& thresholds, const Interval& bounds) {
  if (!(bounds.lo <= 0.0 && bounds.hi >= 0.0))
    throw ConfigError("prox_group_box_columns: coefficient bounds must contain 0");
  if (thresholds.size() != B.cols()) throw DomainError("prox_group_box_columns: one threshold per column expected");
  Matrix out = B;
  for (Index n = 0; n < B.cols(); ++n) {
    if (thresholds[n] < 0.0) continue;
    if (std::isinf(thresholds[n]))
      out.col(n).setZero();
    else
      prox_column(out.col(n), thresholds[n], bounds);
  }
  return out;
}

}  // namespace pnmm
