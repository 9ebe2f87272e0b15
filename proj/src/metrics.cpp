#include "pnmm/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "pnmm/errors.hpp"
#include "pnmm/palm.hpp"

namespace pnmm {

double nmse(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw DomainError("nmse: shape mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw DomainError("nmse: truth has zero norm");
  return (estimate - truth).squaredNorm() / denom;
}

double nmse_masked(const Matrix& estimate, const Matrix& truth,
                   const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || mask.rows() != truth.rows() ||
      mask.cols() != truth.cols())
    throw DomainError("nmse_masked: shape mismatch");
  const double denom = mask.select(truth.array().square(), 0.0).sum();
  if (!(denom > 0.0)) throw DomainError("nmse_masked: truth has zero norm on the mask");
  return mask.select((estimate - truth).array().square(), 0.0).sum() / denom;
}

std::vector<int> best_permutation(const Matrix& M_est, const Matrix& A_est, const Matrix& M_true,
                                  const Matrix& A_true) {
  const int K = int(M_true.cols());
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    Matrix M(M_est.rows(), K), A(K, A_est.cols());
    for (int k = 0; k < K; ++k) {
      M.col(k) = M_est.col(perm[std::size_t(k)]);
      A.row(k) = A_est.row(perm[std::size_t(k)]);
    }
    const double cost = nmse(A, A_true) + nmse(M, M_true);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Variables permute_factors(const Variables& v, const std::vector<int>& perm) {
  const Index K = v.M.cols();
  if (Index(perm.size()) != K) throw DomainError("permute_factors: permutation size != factor count");
  Variables out = v;
  for (Index k = 0; k < K; ++k) {
    out.M.col(k) = v.M.col(perm[std::size_t(k)]);
    out.A.row(k) = v.A.row(perm[std::size_t(k)]);
  }
  if (perm.back() != int(K - 1)) return out;
  for (Index k = 0; k < K - 1; ++k) {
    const Index src = perm[std::size_t(k)];
    for (std::size_t i = 0; i < v.B.size(); ++i) out.B[i].row(k) = v.B[i].row(src);
    out.alpha.row(k) = v.alpha.row(src);
  }
  return out;
}

Score score_estimate(const Variables& est_in, const PhantomGroundTruth& truth, bool optimal_matching) {
  Score s;
  s.permutation.resize(std::size_t(truth.M.cols()));
  std::iota(s.permutation.begin(), s.permutation.end(), 0);
  if (optimal_matching) s.permutation = best_permutation(est_in.M, est_in.A, truth.M, truth.A);
  const Variables est = permute_factors(est_in, s.permutation);

  const Index T = truth.M.cols() - 1;
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> brain = truth.A.topRows(T).array() > 0.0;
  s.nmse[0] = nmse(est.A, truth.A);
  s.nmse[1] = nmse(est.M, truth.M);
  s.nmse[2] = nmse_masked(delivery_ratio_map(est.B), truth.r1(), brain);
  s.nmse[3] = nmse(est.alpha, truth.alpha);
  s.nmse[4] = nmse(binding_potential_map(est.B, est.alpha), truth.bp());
  return s;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  const double n = double(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

Summary ExperimentReport::summary(std::size_t method, std::size_t variable) const {
  return summarize(raw.at(method).at(variable));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, build_ground_truth(cfg.phantom));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const PhantomGroundTruth& truth) {
  if (cfg.realizations < 1) throw ConfigError("experiment: realizations must be >= 1");
  cfg.solver.validate();
  const auto start = std::chrono::steady_clock::now();
  const AcquisitionTimeline timeline = cfg.phantom.timeline();
  const auto masks = truth.masks.class_indices();

  ExperimentReport report;
  report.realizations = cfg.realizations;
  report.raw.resize(report.methods.size());

  for (int r = 0; r < cfg.realizations; ++r) {
    const std::uint64_t seed = cfg.phantom.seed + std::uint64_t(r);
    report.seeds.push_back(seed);
    try {
      const auto noise = add_noise(truth.clean, cfg.phantom.snr_db, seed);
      const auto result = unmix_from_masks(noise.noisy, cfg.phantom.grid, timeline, masks, cfg.solver);
      const Score init = score_estimate(result.init, truth, cfg.optimal_matching);
      const Score fin = score_estimate(result.final.vars, truth, cfg.optimal_matching);
      for (std::size_t v = 0; v < kScoredVariables.size(); ++v) {
        report.raw[0][v].push_back(init.nmse[v]);
        report.raw[1][v].push_back(fin.nmse[v]);
      }
      report.iterations.push_back(result.final.iterations);
      spdlog::info("realization {} (seed {}): {} iterations, NMSE(A) {:.4f} -> {:.4f}", r, seed,
                   result.final.iterations, init.nmse[0], fin.nmse[0]);
    } catch (const std::exception& e) {
      spdlog::error("realization {} (seed {}) failed: {}", r, seed, e.what());
      report.failures.push_back(std::to_string(seed) + ": " + e.what());
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace pnmm
