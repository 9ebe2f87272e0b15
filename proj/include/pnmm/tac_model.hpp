#pragma once

// Core data types and the parametric nonlinear mixing forward model:
//
//   X = M A + sum_{i=0..V} Q_i (Atilde o B_i)
//
// where Atilde holds the tissue rows of A (blood excluded), Q_0 is the tissue
// factor matrix and column k of Q_i (i >= 1) is the causal convolution of
// factor m_k with exp(-alpha_ki t).

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace pnmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct AcquisitionTimeline {
  Vector mid_times;  // minutes, strictly increasing, > 0
  Vector durations;  // minutes, > 0

  AcquisitionTimeline() = default;
  AcquisitionTimeline(Vector mid, Vector dur);

  // Contiguous frames starting at t = 0.
  static AcquisitionTimeline from_durations(const std::vector<double>& durations);

  Index frames() const { return mid_times.size(); }
  void validate() const;
};

struct GridDims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  Index voxels() const { return Index(nx) * ny * nz; }
  Index index(int x, int y, int z) const { return x + Index(nx) * (y + Index(ny) * z); }
  bool operator==(const GridDims&) const = default;
};

struct DynamicImage {
  Matrix data;  // L x N
  GridDims dims;
  std::array<double, 3> voxel_size_mm{2.0, 2.0, 2.0};
  AcquisitionTimeline timeline;

  void validate() const;
};

struct FactorModel {
  Matrix M;  // L x K, column K-1 is blood
  Matrix A;  // K x N

  Index factors() const { return M.cols(); }
  Index tissues() const { return M.cols() - 1; }
  void validate(double tol = 1e-9) const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

struct KineticNonlinearity {
  std::vector<Matrix> B;               // V+1 matrices, (K-1) x N
  Matrix alpha;                        // (K-1) x V, rates in 1/min
  std::vector<Interval> b_bounds;      // V+1
  std::vector<Interval> alpha_bounds;  // V

  Index rates() const { return alpha.cols(); }
  void validate(Index tissues, Index voxels, double tol = 1e-12) const;
};

// Causal (lower-triangular) Toeplitz operator with `kernel` as first column.
class ConvOperator {
 public:
  explicit ConvOperator(Vector kernel);

  Index size() const { return kernel_.size(); }
  const Vector& kernel() const { return kernel_; }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;
  Matrix dense() const;

 private:
  Vector kernel_;
};

// exp(-rate * t_l) for every frame mid-time.
Vector exp_basis(double rate, const AcquisitionTimeline& timeline);

ConvOperator conv_operator(Vector kernel);

// Columns E(rates_k) m_k for the tissue factors. Use build_q_all for Q_0.
Matrix build_q(const Matrix& tissue_factors, const Vector& rates, const AcquisitionTimeline& timeline);

// Q_0 .. Q_V; Q_0 is the tissue factor block itself.
std::vector<Matrix> build_q_all(const Matrix& M, const Matrix& alpha, const AcquisitionTimeline& timeline);

Matrix reconstruct(const Matrix& M, const Matrix& A, const std::vector<Matrix>& B, const Matrix& alpha,
                   const AcquisitionTimeline& timeline);
Matrix reconstruct(const FactorModel& model, const KineticNonlinearity& kin, const AcquisitionTimeline& timeline);

// Same as reconstruct, with the Q matrices already built.
Matrix reconstruct_with_q(const Matrix& M, const Matrix& A, const std::vector<Matrix>& B,
                          const std::vector<Matrix>& Q);

// R1 = 1 + B_0.
Matrix delivery_ratio_map(const KineticNonlinearity& kin);
Matrix delivery_ratio_map(const std::vector<Matrix>& B);

// BP.fT = B_0 + sum_i B_i / alpha_i, per tissue and voxel.
Matrix binding_potential_map(const KineticNonlinearity& kin);
Matrix binding_potential_map(const std::vector<Matrix>& B, const Matrix& alpha);

}  // namespace pnmm
