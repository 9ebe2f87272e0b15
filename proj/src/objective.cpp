#include "pnmm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnmm/errors.hpp"

namespace pnmm {

void SolverConfig::validate() const {
  if (!(eta >= 0.0) || !(beta >= 0.0) || !(lambda >= 0.0))
    throw ConfigError("solver: eta, beta and lambda must be nonnegative");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("solver: gamma must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("solver: epsilon must be positive");
  if (max_iters < 1) throw ConfigError("solver: max_iters must be positive");
  if (warmup_fixed_M_iters < 0) throw ConfigError("solver: warmup_fixed_M_iters must be nonnegative");
  if (alpha_bounds.empty()) throw ConfigError("solver: at least one exponential rate is required");
  if (b_bounds.size() != alpha_bounds.size() + 1)
    throw ConfigError("solver: need one B bound per basis index (V+1) and one alpha bound per rate (V)");
  for (const auto& b : b_bounds)
    if (!(b.lo <= 0.0 && b.hi >= 0.0)) throw ConfigError("solver: every B bound interval must contain 0");
  for (const auto& a : alpha_bounds)
    if (!(a.lo > 0.0 && a.hi >= a.lo)) throw ConfigError("solver: alpha bounds need 0 < lo <= hi");
  if (alpha_init.size() != alpha_bounds.size()) throw ConfigError("solver: alpha_init needs one rate per index");
  if (!(alpha_trust_fraction > 0.0 && alpha_trust_fraction < 1.0))
    throw ConfigError("solver: alpha_trust_fraction must lie in (0, 1)");
}

double max_eigenvalue_psd(const Matrix& H) {
  if (H.rows() == 0) return 0.0;
  if (H.rows() == 1) return std::max(H(0, 0), 0.0);
  if (H.rows() == 2) {
    const double tr = H(0, 0) + H(1, 1);
    const double diff = H(0, 0) - H(1, 1);
    const double off = 0.5 * (H(0, 1) + H(1, 0));
    return 0.5 * (tr + std::sqrt(diff * diff + 4.0 * off * off));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

namespace {

// Stack-allocated for the per-voxel loops; factor counts stay far below 16.
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;

double max_eigenvalue_small(const SmallMatrix& H) {
  if (H.rows() == 0) return 0.0;
  if (H.rows() == 1) return std::max(H(0, 0), 0.0);
  if (H.rows() == 2) {
    const double diff = H(0, 0) - H(1, 1);
    const double off = 0.5 * (H(0, 1) + H(1, 0));
    return 0.5 * (H(0, 0) + H(1, 1) + std::sqrt(diff * diff + 4.0 * off * off));
  }
  if (H.rows() == 3) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(Eigen::Matrix3d(0.5 * (H + H.transpose())), Eigen::EigenvaluesOnly);
    // closed-form roots lose a few digits; pad so the bound stays an upper bound
    return std::max(es.eigenvalues().maxCoeff(), 0.0) * (1.0 + 1e-10) + 1e-14 * H.trace();
  }
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(H, Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

double group_norm(const Matrix& B) {
  double total = 0.0;
  for (Index n = 0; n < B.cols(); ++n) total += B.col(n).norm();
  return total;
}

// Kernel t^p exp(-rate t) sampled at frame mid-times.
Vector moment_kernel(double rate, int power, const AcquisitionTimeline& timeline) {
  Vector k = exp_basis(rate, timeline);
  for (int p = 0; p < power; ++p) k = k.cwiseProduct(timeline.mid_times);
  return k;
}

}  // namespace

PnmmObjective::PnmmObjective(const Matrix& Y, GridDims dims, AcquisitionTimeline timeline, Matrix M0,
                             SolverConfig cfg)
    : Y_(Y), dims_(dims), timeline_(std::move(timeline)), S_(dims), M0_(std::move(M0)), cfg_(std::move(cfg)) {
  timeline_.validate();
  cfg_.validate();
  if (Y_.rows() != timeline_.frames()) throw DomainError("objective: data rows != frame count");
  if (Y_.cols() != dims_.voxels()) throw DomainError("objective: data columns != voxel count");
  if (M0_.rows() != Y_.rows()) throw DomainError("objective: anchor factors have the wrong length");
}

void PnmmObjective::check_shapes(const Variables& v) const {
  const Index L = Y_.rows(), N = Y_.cols(), K = v.M.cols();
  if (K < 2) throw DomainError("objective: need at least one tissue plus blood");
  if (v.M.rows() != L) throw DomainError("objective: M has the wrong number of frames");
  if (M0_.cols() != K) throw DomainError("objective: anchor factors have the wrong count");
  if (v.A.rows() != K || v.A.cols() != N) throw DomainError("objective: A has the wrong shape");
  if (v.alpha.rows() != K - 1 || v.alpha.cols() != cfg_.rates())
    throw DomainError("objective: alpha has the wrong shape");
  if (Index(v.B.size()) != v.alpha.cols() + 1) throw DomainError("objective: expected V+1 coefficient matrices");
  for (const auto& Bi : v.B)
    if (Bi.rows() != K - 1 || Bi.cols() != N) throw DomainError("objective: B_i has the wrong shape");
}

void PnmmObjective::check_feasible(const Variables& v, double tol) const {
  check_shapes(v);
  if ((v.M.array() < -tol).any()) throw NumericalError("infeasible iterate: M has negative entries");
  for (Index n = 0; n < v.A.cols(); ++n) {
    if ((v.A.col(n).array() < -tol).any() || std::abs(v.A.col(n).sum() - 1.0) > tol)
      throw NumericalError("infeasible iterate: column " + std::to_string(n) + " of A is off the simplex");
  }
  for (std::size_t i = 0; i < v.B.size(); ++i) {
    const auto& bd = cfg_.b_bounds[i];
    if ((v.B[i].array() < bd.lo - tol).any() || (v.B[i].array() > bd.hi + tol).any())
      throw NumericalError("infeasible iterate: B_" + std::to_string(i) + " outside its bounds");
  }
  for (Index i = 0; i < v.alpha.cols(); ++i)
    for (Index k = 0; k < v.alpha.rows(); ++k)
      if (!cfg_.alpha_bounds[std::size_t(i)].contains(v.alpha(k, i), tol))
        throw NumericalError("infeasible iterate: alpha outside its bounds");
}

Matrix PnmmObjective::residual(const Variables& v) const {
  return Y_ - reconstruct(v.M, v.A, v.B, v.alpha, timeline_);
}

ObjectiveTerms PnmmObjective::evaluate(const Variables& v) const {
  check_feasible(v);
  ObjectiveTerms t;
  t.data = 0.5 * residual(v).squaredNorm();
  t.smoothness = S_.penalty(v.A);
  t.anchor = 0.5 * (v.M - M0_).squaredNorm();
  for (const auto& Bi : v.B) t.sparsity += group_norm(Bi);
  t.total = t.data + cfg_.eta * t.smoothness + cfg_.beta * t.anchor + cfg_.lambda * t.sparsity;
  return t;
}

double PnmmObjective::smooth_value(const Variables& v) const {
  check_shapes(v);
  return 0.5 * residual(v).squaredNorm() + cfg_.eta * S_.penalty(v.A) + cfg_.beta * 0.5 * (v.M - M0_).squaredNorm();
}

VectorGradient PnmmObjective::grad_m(const Variables& v, Index k) const {
  check_shapes(v);
  const Index K = v.M.cols();
  const Index L = v.M.rows();
  if (k < 0 || k >= K) throw DomainError("grad_m: factor index out of range");
  const Matrix R = residual(v);

  VectorGradient out;
  if (k == K - 1) {
    // blood: linear block only
    const Vector a = v.A.row(k).transpose();
    out.gradient = -R * a + cfg_.beta * (v.M.col(k) - M0_.col(k));
    out.lipschitz = a.squaredNorm() + cfg_.beta;
    return out;
  }

  // m_k enters X through (a_k + w_k0) and through E_ki m_k w_ki, i = 1..V.
  const Index V = v.alpha.cols();
  std::vector<Vector> coeff(std::size_t(V + 1));
  coeff[0] = (v.A.row(k).array() * (1.0 + v.B[0].row(k).array())).matrix().transpose();
  for (Index i = 1; i <= V; ++i)
    coeff[std::size_t(i)] = (v.A.row(k).array() * v.B[std::size_t(i)].row(k).array()).matrix().transpose();

  std::vector<Matrix> E(std::size_t(V + 1));
  E[0] = Matrix::Identity(L, L);
  for (Index i = 1; i <= V; ++i) E[std::size_t(i)] = ConvOperator(exp_basis(v.alpha(k, i - 1), timeline_)).dense();

  out.gradient = cfg_.beta * (v.M.col(k) - M0_.col(k));
  for (Index i = 0; i <= V; ++i) out.gradient.noalias() -= E[std::size_t(i)].transpose() * (R * coeff[std::size_t(i)]);

  // The block is quadratic: Hessian = sum_ij <c_i, c_j> E_i^T E_j + beta I.
  Matrix H = cfg_.beta * Matrix::Identity(L, L);
  for (Index i = 0; i <= V; ++i)
    for (Index j = 0; j <= V; ++j) {
      const double g = coeff[std::size_t(i)].dot(coeff[std::size_t(j)]);
      if (g != 0.0) H.noalias() += g * (E[std::size_t(i)].transpose() * E[std::size_t(j)]);
    }
  out.lipschitz = max_eigenvalue_psd(0.5 * (H + H.transpose()));
  return out;
}

MatrixGradient PnmmObjective::grad_a(const Variables& v) const {
  check_shapes(v);
  const Index K = v.M.cols(), N = v.A.cols();
  const auto Q = build_q_all(v.M, v.alpha, timeline_);
  const Matrix R = Y_ - reconstruct_with_q(v.M, v.A, v.B, Q);

  MatrixGradient out;
  out.gradient = -v.M.transpose() * R;
  for (std::size_t i = 0; i < Q.size(); ++i)
    out.gradient.topRows(K - 1).array() -= (Q[i].transpose() * R).array() * v.B[i].array();
  if (cfg_.eta > 0.0) out.gradient += cfg_.eta * S_.gram_apply_rows(v.A);

  // The data term separates over voxels: x_n = P_n a_n with
  // P_n = M + [sum_i Q_i diag(b_in) | 0] = Z W_n, Z = [M | Q_0 | .. | Q_V].
  // P_n^T P_n = W_n^T (Z^T Z) W_n is assembled from the shared Gram matrix.
  const Index T = K - 1;
  Matrix Z(v.M.rows(), K + Index(Q.size()) * T);
  Z.leftCols(K) = v.M;
  for (std::size_t i = 0; i < Q.size(); ++i) Z.middleCols(K + Index(i) * T, T) = Q[i];
  const Matrix G = Z.transpose() * Z;
  Vector per_voxel(N);
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < N; ++n) {
    SmallMatrix W = SmallMatrix::Zero(Z.cols(), K);
    for (Index k = 0; k < K; ++k) W(k, k) = 1.0;
    for (std::size_t i = 0; i < Q.size(); ++i)
      for (Index k = 0; k < T; ++k) W(K + Index(i) * T + k, k) = v.B[i](k, n);
    const SmallMatrix H = W.transpose() * G * W;
    per_voxel[n] = max_eigenvalue_small(H);
  }
  const double smooth = cfg_.eta * S_.gram_norm();
  out.lipschitz = (N > 0 ? per_voxel.maxCoeff() : 0.0) + smooth;
  out.column_lipschitz = per_voxel.array() + smooth;
  return out;
}

MatrixGradient PnmmObjective::grad_b(const Variables& v, Index i) const {
  check_shapes(v);
  if (i < 0 || i >= Index(v.B.size())) throw DomainError("grad_b: basis index out of range");
  const Index K = v.M.cols(), N = v.A.cols();
  const auto Q = build_q_all(v.M, v.alpha, timeline_);
  const Matrix R = Y_ - reconstruct_with_q(v.M, v.A, v.B, Q);
  const auto& Qi = Q[std::size_t(i)];
  const auto At = v.A.topRows(K - 1);

  MatrixGradient out;
  out.gradient = -((Qi.transpose() * R).array() * At.array()).matrix();

  // Per-voxel Hessian diag(a_n) Q_i^T Q_i diag(a_n).
  const Matrix G = Qi.transpose() * Qi;
  Vector per_voxel(N);
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < N; ++n) {
    SmallMatrix H = G;
    for (Index r = 0; r < H.rows(); ++r)
      for (Index c = 0; c < H.cols(); ++c) H(r, c) *= At(r, n) * At(c, n);
    per_voxel[n] = max_eigenvalue_small(H);
  }
  out.lipschitz = N > 0 ? per_voxel.maxCoeff() : 0.0;
  out.column_lipschitz = std::move(per_voxel);
  return out;
}

ScalarGradient PnmmObjective::grad_alpha(const Variables& v, Index k, Index i) const {
  check_shapes(v);
  const Index V = v.alpha.cols();
  if (k < 0 || k >= v.alpha.rows()) throw DomainError("grad_alpha: tissue index out of range");
  if (i < 1 || i > V) throw DomainError("grad_alpha: basis index must lie in 1..V");
  const double rate = v.alpha(k, i - 1);
  const Vector m = v.M.col(k);
  const Vector w = (v.A.row(k).array() * v.B[std::size_t(i)].row(k).array()).matrix().transpose();
  const Matrix R = residual(v);
  const Vector r = R * w;

  // X depends on alpha_ki through (E_ki m_k) w^T, and
  // d/dalpha exp(-alpha t) = -t exp(-alpha t).
  const Vector dg = -ConvOperator(moment_kernel(rate, 1, timeline_)).apply(m);

  ScalarGradient out;
  out.gradient = -dg.dot(r);

  // J''(alpha) = -g''^T r0 + (||g'||^2 + g^T g'') ||w||^2 with r0 the residual
  // without this term (independent of alpha). For m >= 0 every |g^(p)| is
  // entrywise decreasing in alpha, so the values at the interval floor bound
  // |J''| over [floor, hi].
  const auto& bd = cfg_.alpha_bounds[std::size_t(i - 1)];
  out.floor = std::max(bd.lo, rate * (1.0 - cfg_.alpha_trust_fraction));
  const Vector g = ConvOperator(exp_basis(rate, timeline_)).apply(m);
  const Vector r0 = r + g * w.squaredNorm();
  const Vector g0 = ConvOperator(moment_kernel(out.floor, 0, timeline_)).apply(m);
  const Vector g1 = ConvOperator(moment_kernel(out.floor, 1, timeline_)).apply(m);
  const Vector g2 = ConvOperator(moment_kernel(out.floor, 2, timeline_)).apply(m);
  out.lipschitz = g2.cwiseAbs().dot(r0.cwiseAbs()) + (g1.squaredNorm() + g0.cwiseAbs().dot(g2.cwiseAbs())) * w.squaredNorm();
  return out;
}

}  // namespace pnmm
