#include "pnmm/tac_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnmm/errors.hpp"

namespace pnmm {

AcquisitionTimeline::AcquisitionTimeline(Vector mid, Vector dur) : mid_times(std::move(mid)), durations(std::move(dur)) {
  validate();
}

AcquisitionTimeline AcquisitionTimeline::from_durations(const std::vector<double>& durations) {
  Vector mid(Index(durations.size()));
  Vector dur(Index(durations.size()));
  double start = 0.0;
  for (std::size_t l = 0; l < durations.size(); ++l) {
    dur[Index(l)] = durations[l];
    mid[Index(l)] = start + 0.5 * durations[l];
    start += durations[l];
  }
  return AcquisitionTimeline(std::move(mid), std::move(dur));
}

void AcquisitionTimeline::validate() const {
  if (mid_times.size() == 0) throw DomainError("timeline has no frames");
  if (mid_times.size() != durations.size())
    throw DomainError("timeline: mid_times and durations differ in length");
  for (Index l = 0; l < mid_times.size(); ++l) {
    if (!(mid_times[l] > 0.0)) throw DomainError("timeline: frame mid-times must be > 0");
    if (!(durations[l] > 0.0)) throw DomainError("timeline: frame durations must be > 0");
    if (l > 0 && !(mid_times[l] > mid_times[l - 1]))
      throw DomainError("timeline: frame mid-times must be strictly increasing");
  }
}

void DynamicImage::validate() const {
  timeline.validate();
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw DomainError("image: grid dims must be positive");
  if (data.cols() != dims.voxels()) throw DomainError("image: voxel count does not match grid dims");
  if (data.rows() != timeline.frames()) throw DomainError("image: frame count does not match timeline");
}

void FactorModel::validate(double tol) const {
  if (M.cols() < 2) throw DomainError("factor model needs at least one tissue plus blood");
  if (A.rows() != M.cols()) throw DomainError("factor model: A rows must equal M columns");
  if ((M.array() < 0.0).any()) throw DomainError("factor model: M must be nonnegative");
  for (Index n = 0; n < A.cols(); ++n) {
    if ((A.col(n).array() < -tol).any()) throw DomainError("factor model: negative proportion");
    if (std::abs(A.col(n).sum() - 1.0) > tol) throw DomainError("factor model: proportions must sum to one");
  }
}

void KineticNonlinearity::validate(Index tissues, Index voxels, double tol) const {
  const Index V = alpha.cols();
  if (alpha.rows() != tissues) throw DomainError("kinetics: alpha must have one row per tissue");
  if (Index(B.size()) != V + 1) throw DomainError("kinetics: expected V+1 coefficient matrices");
  if (Index(b_bounds.size()) != V + 1 || Index(alpha_bounds.size()) != V)
    throw DomainError("kinetics: bounds do not match V");
  for (Index i = 0; i <= V; ++i) {
    const auto& Bi = B[std::size_t(i)];
    if (Bi.rows() != tissues || Bi.cols() != voxels) throw DomainError("kinetics: B_i has the wrong shape");
    const auto& bd = b_bounds[std::size_t(i)];
    if ((Bi.array() < bd.lo - tol).any() || (Bi.array() > bd.hi + tol).any())
      throw DomainError("kinetics: B_" + std::to_string(i) + " outside its bounds");
  }
  for (Index i = 0; i < V; ++i) {
    const auto& bd = alpha_bounds[std::size_t(i)];
    if (!(bd.lo > 0.0)) throw DomainError("kinetics: alpha lower bounds must be > 0");
    for (Index k = 0; k < tissues; ++k)
      if (!bd.contains(alpha(k, i), tol)) throw DomainError("kinetics: alpha outside its bounds");
  }
}

ConvOperator::ConvOperator(Vector kernel) : kernel_(std::move(kernel)) {
  if (kernel_.size() < 1) throw DomainError("conv operator: empty kernel");
}

Vector ConvOperator::apply(const Vector& x) const {
  const Index L = size();
  if (x.size() != L) throw DomainError("conv operator: length mismatch");
  Vector y = Vector::Zero(L);
  for (Index l = 0; l < L; ++l) {
    double acc = 0.0;
    for (Index j = 0; j <= l; ++j) acc += kernel_[l - j] * x[j];
    y[l] = acc;
  }
  return y;
}

Vector ConvOperator::apply_transpose(const Vector& y) const {
  const Index L = size();
  if (y.size() != L) throw DomainError("conv operator: length mismatch");
  Vector x = Vector::Zero(L);
  for (Index j = 0; j < L; ++j) {
    double acc = 0.0;
    for (Index l = j; l < L; ++l) acc += kernel_[l - j] * y[l];
    x[j] = acc;
  }
  return x;
}

Matrix ConvOperator::dense() const {
  const Index L = size();
  Matrix T = Matrix::Zero(L, L);
  for (Index j = 0; j < L; ++j)
    for (Index l = j; l < L; ++l) T(l, j) = kernel_[l - j];
  return T;
}

Vector exp_basis(double rate, const AcquisitionTimeline& timeline) {
  if (!(rate >= 0.0)) throw DomainError("exp_basis: rate must be nonnegative");
  return (-rate * timeline.mid_times.array()).exp().matrix();
}

ConvOperator conv_operator(Vector kernel) { return ConvOperator(std::move(kernel)); }

Matrix build_q(const Matrix& tissue_factors, const Vector& rates, const AcquisitionTimeline& timeline) {
  if (tissue_factors.rows() != timeline.frames()) throw DomainError("build_q: factor length != frame count");
  if (rates.size() != tissue_factors.cols()) throw DomainError("build_q: one rate per tissue factor expected");
  Matrix Q(tissue_factors.rows(), tissue_factors.cols());
  for (Index k = 0; k < tissue_factors.cols(); ++k)
    Q.col(k) = ConvOperator(exp_basis(rates[k], timeline)).apply(tissue_factors.col(k));
  return Q;
}

std::vector<Matrix> build_q_all(const Matrix& M, const Matrix& alpha, const AcquisitionTimeline& timeline) {
  const Index tissues = M.cols() - 1;
  if (alpha.rows() != tissues) throw DomainError("build_q_all: alpha rows != tissue count");
  std::vector<Matrix> Q;
  Q.reserve(std::size_t(alpha.cols() + 1));
  Q.push_back(M.leftCols(tissues));
  for (Index i = 0; i < alpha.cols(); ++i) Q.push_back(build_q(M.leftCols(tissues), alpha.col(i), timeline));
  return Q;
}

Matrix reconstruct_with_q(const Matrix& M, const Matrix& A, const std::vector<Matrix>& B,
                          const std::vector<Matrix>& Q) {
  const Index K = M.cols();
  const Index N = A.cols();
  if (A.rows() != K) throw DomainError("reconstruct: A rows != M columns");
  if (B.size() != Q.size()) throw DomainError("reconstruct: B and Q counts differ");
  for (std::size_t i = 0; i < B.size(); ++i)
    if (B[i].rows() != K - 1 || B[i].cols() != N || Q[i].rows() != M.rows() || Q[i].cols() != K - 1)
      throw DomainError("reconstruct: coefficient or Q shape mismatch");

  // Column blocks keep each product independent of the thread count.
  constexpr Index kBlock = 1024;
  Matrix X(M.rows(), N);
  const Index blocks = (N + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index c0 = b * kBlock, w = std::min(kBlock, N - c0);
    auto Xb = X.middleCols(c0, w);
    Xb.noalias() = M * A.middleCols(c0, w);
    for (std::size_t i = 0; i < B.size(); ++i)
      Xb.noalias() += Q[i] * (A.block(0, c0, K - 1, w).array() * B[i].middleCols(c0, w).array()).matrix();
  }
  return X;
}

Matrix reconstruct(const Matrix& M, const Matrix& A, const std::vector<Matrix>& B, const Matrix& alpha,
                   const AcquisitionTimeline& timeline) {
  if (Index(B.size()) != alpha.cols() + 1) throw DomainError("reconstruct: expected V+1 coefficient matrices");
  return reconstruct_with_q(M, A, B, build_q_all(M, alpha, timeline));
}

Matrix reconstruct(const FactorModel& model, const KineticNonlinearity& kin, const AcquisitionTimeline& timeline) {
  return reconstruct(model.M, model.A, kin.B, kin.alpha, timeline);
}

Matrix delivery_ratio_map(const std::vector<Matrix>& B) {
  if (B.empty()) throw DomainError("delivery_ratio_map: B_0 missing");
  return (B.front().array() + 1.0).matrix();
}

Matrix delivery_ratio_map(const KineticNonlinearity& kin) { return delivery_ratio_map(kin.B); }

Matrix binding_potential_map(const std::vector<Matrix>& B, const Matrix& alpha) {
  if (Index(B.size()) != alpha.cols() + 1) throw DomainError("binding_potential_map: expected V+1 matrices");
  Matrix bp = B.front();
  for (Index i = 0; i < alpha.cols(); ++i) {
    for (Index k = 0; k < alpha.rows(); ++k) {
      const double rate = alpha(k, i);
      // alpha = 0 is irreversible kinetics, which has no finite BP
      if (rate == 0.0) throw DomainError("binding_potential_map: zero rate (irreversible kinetics)");
      bp.row(k) += B[std::size_t(i + 1)].row(k) / rate;
    }
  }
  return bp;
}

Matrix binding_potential_map(const KineticNonlinearity& kin) { return binding_potential_map(kin.B, kin.alpha); }

}  // namespace pnmm
