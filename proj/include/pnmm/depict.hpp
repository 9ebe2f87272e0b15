#pragma once

// Reference-tissue basis pursuit (DEPICT). Each voxel TAC x is modelled as
//
//   x = m_R + b_0 m_R + sum_j b_j E(r_j) m_R
//
// with rates r_j on a logarithmic grid, so R1 = 1 + b_0 and
// BP = b_0 + sum_j b_j / r_j.

#include <vector>

#include "pnmm/tac_model.hpp"

namespace pnmm {

struct BasisGrid {
  Vector rates;  // strictly increasing, > 0
  Matrix D;      // L x (n_basis + 1); column 0 is the offset m_R

  Index basis() const { return rates.size(); }
};

struct DepictConfig {
  double rate_min = 0.03;
  double rate_max = 6.0;
  int n_basis = 30;
  // lambda_l1 = lambda_rel * ||D^T r||_inf per voxel unless lambda_abs >= 0.
  double lambda_rel = 1e-4;
  double lambda_abs = -1.0;
  Interval b0_bounds{0.0, 0.7};
  Interval coeff_bounds{0.0, 1e300};
  double tolerance = 1e-8;
  int max_iters = 5000;
  int threads = 0;

  void validate() const;
};

// rates_j = rate_min (rate_max / rate_min)^(j / (n_basis - 1)).
Vector log_rates(double rate_min, double rate_max, int n_basis);

BasisGrid make_basis(double rate_min, double rate_max, int n_basis, const Vector& m_R,
                     const AcquisitionTimeline& timeline);

// Precomputed per-grid data shared across voxels.
class DepictSolver {
 public:
  DepictSolver(BasisGrid grid, DepictConfig cfg);

  const BasisGrid& grid() const { return grid_; }
  const DepictConfig& config() const { return cfg_; }
  double lipschitz() const { return lipschitz_; }

  struct Fit {
    Vector coeffs;  // b_0, b_1 .. b_nbasis
    double objective = 0.0;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // objective after each iteration, if requested
  };

  // Fits x - m_R. `lambda` < 0 selects the configured rule.
  Fit fit(const Vector& x, double lambda = -1.0, bool keep_trace = false) const;

  double objective(const Vector& residual_target, const Vector& coeffs, double lambda) const;
  double bp(const Vector& coeffs) const;

 private:
  Vector prox(const Vector& z, double step_lambda) const;

  BasisGrid grid_;
  DepictConfig cfg_;
  Matrix gram_;
  double lipschitz_ = 0.0;
};

struct DepictMaps {
  Vector bp;
  Vector r1;
  Index failures = 0;  // voxels set to NaN
};

DepictMaps depict_bp_map(const DynamicImage& image, const Vector& m_R, const DepictConfig& cfg);

}  // namespace pnmm
