#pragma once

// Proximal alternating linearized minimization for the PNMM objective.
// Each outer iteration visits the blocks in order
//   m_1 .. m_K,  A,  B_0 .. B_V,  alpha_ki (i = 1..V, k = 1..K-1)
// with a projected (or proximal) gradient step of size gamma / L_block.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pnmm/objective.hpp"

namespace pnmm {

enum class StopReason { converged, max_iters };

struct IterationRecord {
  int iteration = 0;
  ObjectiveTerms terms;
};

struct BlockLipschitz {
  std::vector<double> m;      // per factor
  double a = 0.0;
  std::vector<double> b;      // per basis index
  Matrix alpha;               // (K-1) x V
};

struct SolverState {
  Variables vars;
  std::vector<IterationRecord> history;  // entry 0 is the starting point
  int iterations = 0;
  StopReason stop = StopReason::max_iters;
  BlockLipschitz lipschitz;

  const ObjectiveTerms& last() const { return history.back().terms; }
};

// Called after every block update with the block name ("m1", "A", "B0",
// "alpha12", ...) and the current variables.
using BlockObserver = std::function<void(const std::string& block, const Variables& vars)>;

// Projects `init` onto the constraint sets and runs the solver.
// `anchor` is M0 of the factor penalty.
SolverState palm_run(const Matrix& Y, GridDims dims, const AcquisitionTimeline& timeline, Variables init,
                     const Matrix& anchor, const SolverConfig& cfg, const BlockObserver& observer = {});

// Makes `v` feasible: M >= 0, simplex columns of A, clamped B and alpha.
void project_variables(Variables& v, const SolverConfig& cfg);

// Trapezoidal area under each column of `tacs` (L x n).
Vector trapezoid_auc(const Matrix& tacs, const AcquisitionTimeline& timeline);

// Factor initialization: for each class mask, average the voxel TACs whose
// AUC rank lies in the (10%, 20%] band. Masks with fewer than 10 voxels fall
// back to the plain mean.
Matrix init_factors_from_auc(const Matrix& Y, const std::vector<std::vector<Index>>& masks,
                             const AcquisitionTimeline& timeline);

// Starting kinetics: zero coefficients, rates from cfg.alpha_init.
Variables initial_kinetics(const Matrix& M, const Matrix& A, const SolverConfig& cfg);

struct UnmixResult {
  Variables init;      // after the kinetics-only pass; the scored initialization
  SolverState prepass;  // B and alpha only, M and A fixed
  SolverState final;
};

// Full protocol from class masks (gray, white, blood order, blood last):
// AUC-band factors, hard proportions, kinetics-only pass, then the full solver.
UnmixResult unmix_from_masks(const Matrix& Y, GridDims dims, const AcquisitionTimeline& timeline,
                             const std::vector<std::vector<Index>>& masks, const SolverConfig& cfg,
                             const BlockObserver& observer = {});

// Writes iteration,J,data,smoothness,anchor,sparsity rows.
void write_objective_csv(std::ostream& os, const SolverState& state);

const char* to_string(StopReason r);

}  // namespace pnmm
