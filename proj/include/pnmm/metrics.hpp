#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pnmm/objective.hpp"
#include "pnmm/phantom.hpp"

namespace pnmm {

// ||est - truth||_F^2 / ||truth||_F^2
double nmse(const Matrix& estimate, const Matrix& truth);
// Same, restricted to entries where mask(i, j) is true.
double nmse_masked(const Matrix& estimate, const Matrix& truth, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);

inline constexpr std::array<const char*, 5> kScoredVariables{"A", "M", "R1", "alpha", "BP.fT"};

struct Score {
  std::array<double, 5> nmse{};  // in kScoredVariables order
  std::vector<int> permutation;  // estimated factor index for each true factor
};

// Factor order minimizing NMSE(A) + NMSE(M) over all K! assignments.
std::vector<int> best_permutation(const Matrix& M_est, const Matrix& A_est, const Matrix& M_true,
                                  const Matrix& A_true);

// Reorders factors (columns of M, rows of A). Kinetic rows follow when the
// last factor stays last; otherwise they are left as they are.
Variables permute_factors(const Variables& v, const std::vector<int>& perm);

// R1 is scored on entries where the true tissue proportion is positive; BP
// on every tissue entry.
Score score_estimate(const Variables& est, const PhantomGroundTruth& truth, bool optimal_matching = false);

struct ExperimentConfig {
  PhantomConfig phantom;
  SolverConfig solver;
  int realizations = 20;
  bool optimal_matching = false;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct ExperimentReport {
  std::vector<std::string> methods{"Initial", "PNMM"};
  std::vector<std::uint64_t> seeds;
  // raw[method][variable][realization]; failed realizations are absent.
  std::vector<std::array<std::vector<double>, 5>> raw;
  std::vector<int> iterations;
  std::vector<std::string> failures;  // "seed: message"
  int realizations = 0;
  std::string config_hash;
  double runtime_seconds = 0.0;

  Summary summary(std::size_t method, std::size_t variable) const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);
// Uses an already generated noiseless ground truth.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const PhantomGroundTruth& truth);

}  // namespace pnmm
