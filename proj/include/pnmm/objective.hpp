#pragma once

// PNMM cost function, block gradients and block Lipschitz constants.
//
//   J = 0.5 ||Y - X||_F^2 + eta * 0.5 ||A S^T||_F^2 + beta * 0.5 ||M - M0||_F^2
//       + lambda * sum_i ||B_i||_{2,1}
//
// plus indicator terms that are enforced by projection. Gradients below are
// for the smooth part; the group-lasso term is handled by the prox in the
// solver.

#include <vector>

#include "pnmm/spatial.hpp"
#include "pnmm/tac_model.hpp"

namespace pnmm {

struct SolverConfig {
  double eta = 0.5;
  double beta = 0.1;
  double lambda = 0.5;
  double gamma = 0.9;
  double epsilon = 5e-3;
  int max_iters = 500;
  int warmup_fixed_M_iters = 50;

  std::vector<Interval> b_bounds{{0.0, 0.7}, {-0.2, 0.0}, {0.0, 0.15}};
  std::vector<Interval> alpha_bounds{{0.0063, 6.0}, {0.0063, 6.0}};
  // Starting rates per basis index when no estimate is available.
  std::vector<double> alpha_init{0.6, 0.06};

  // Fraction of the current rate that an alpha step may move below it;
  // the alpha Lipschitz bound is taken over that interval.
  double alpha_trust_fraction = 0.5;

  // Blocks that the solver updates.
  bool update_M = true;
  bool update_A = true;
  bool update_B = true;
  bool update_alpha = true;

  // Step each voxel column of A and B_i with its own constant instead of the
  // block maximum.
  bool per_voxel_steps = true;

  int threads = 0;  // 0 = OpenMP default

  int rates() const { return int(alpha_bounds.size()); }
  void validate() const;
};

struct Variables {
  Matrix M;               // L x K
  Matrix A;               // K x N
  std::vector<Matrix> B;  // V+1, (K-1) x N
  Matrix alpha;           // (K-1) x V

  Index factors() const { return M.cols(); }
  Index tissues() const { return M.cols() - 1; }
  Index rates() const { return alpha.cols(); }
};

struct ObjectiveTerms {
  double data = 0.0;        // 0.5 ||Y - X||^2
  double smoothness = 0.0;  // Phi(A), unweighted
  double anchor = 0.0;      // Psi(M), unweighted
  double sparsity = 0.0;    // Omega(B), unweighted
  double total = 0.0;       // weighted sum
};

struct VectorGradient {
  Vector gradient;
  double lipschitz = 0.0;
};

struct MatrixGradient {
  Matrix gradient;
  double lipschitz = 0.0;  // whole block
  // Per-column constants; the data term separates over voxels, so
  // diag(column_lipschitz) majorizes the block Hessian.
  Vector column_lipschitz;
};

struct ScalarGradient {
  double gradient = 0.0;
  double lipschitz = 0.0;
  // Lower end of the interval on which `lipschitz` is valid; the update must
  // not move the rate below it.
  double floor = 0.0;
};

class PnmmObjective {
 public:
  PnmmObjective(const Matrix& Y, GridDims dims, AcquisitionTimeline timeline, Matrix M0, SolverConfig cfg);

  const Matrix& data() const { return Y_; }
  const AcquisitionTimeline& timeline() const { return timeline_; }
  const SpatialOperator& spatial() const { return S_; }
  const SolverConfig& config() const { return cfg_; }
  const Matrix& anchor() const { return M0_; }

  // Full objective; throws NumericalError when `v` is infeasible.
  ObjectiveTerms evaluate(const Variables& v) const;
  double value(const Variables& v) const { return evaluate(v).total; }
  // Data term plus eta*Phi + beta*Psi, no feasibility checks.
  double smooth_value(const Variables& v) const;

  Matrix residual(const Variables& v) const;

  VectorGradient grad_m(const Variables& v, Index k) const;
  MatrixGradient grad_a(const Variables& v) const;
  MatrixGradient grad_b(const Variables& v, Index i) const;
  ScalarGradient grad_alpha(const Variables& v, Index k, Index i) const;

  // Throws NumericalError describing the first violated constraint.
  void check_feasible(const Variables& v, double tol = 1e-9) const;

 private:
  void check_shapes(const Variables& v) const;

  Matrix Y_;
  GridDims dims_;
  AcquisitionTimeline timeline_;
  SpatialOperator S_;
  Matrix M0_;
  SolverConfig cfg_;
};

// Largest eigenvalue of a small symmetric positive semidefinite matrix.
double max_eigenvalue_psd(const Matrix& H);

}  // namespace pnmm
