#include "pnmm/palm.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "pnmm/errors.hpp"
#include "pnmm/projections.hpp"

namespace pnmm {

const char* to_string(StopReason r) { return r == StopReason::converged ? "converged" : "max_iters"; }

void project_variables(Variables& v, const SolverConfig& cfg) {
  v.M = project_nonneg(v.M);
  v.A = project_simplex_columns(v.A);
  for (std::size_t i = 0; i < v.B.size() && i < cfg.b_bounds.size(); ++i)
    v.B[i] = v.B[i].cwiseMax(cfg.b_bounds[i].lo).cwiseMin(cfg.b_bounds[i].hi);
  for (Index i = 0; i < v.alpha.cols() && i < Index(cfg.alpha_bounds.size()); ++i)
    for (Index k = 0; k < v.alpha.rows(); ++k) v.alpha(k, i) = cfg.alpha_bounds[std::size_t(i)].clamp(v.alpha(k, i));
}

Variables initial_kinetics(const Matrix& M, const Matrix& A, const SolverConfig& cfg) {
  cfg.validate();
  Variables v;
  v.M = M;
  v.A = A;
  const Index tissues = M.cols() - 1;
  const Index V = cfg.rates();
  v.B.assign(std::size_t(V + 1), Matrix::Zero(tissues, A.cols()));
  v.alpha.resize(tissues, V);
  for (Index i = 0; i < V; ++i) v.alpha.col(i).setConstant(cfg.alpha_bounds[std::size_t(i)].clamp(cfg.alpha_init[std::size_t(i)]));
  return v;
}

namespace {

void require_finite(const ObjectiveTerms& t, int iteration) {
  if (!std::isfinite(t.total))
    throw NumericalError("objective became non-finite at iteration " + std::to_string(iteration) +
                         " (data=" + std::to_string(t.data) + "); check data scaling and bounds");
}

}  // namespace

SolverState palm_run(const Matrix& Y, GridDims dims, const AcquisitionTimeline& timeline, Variables init,
                     const Matrix& anchor, const SolverConfig& cfg, const BlockObserver& observer) {
  cfg.validate();
  const int saved_threads = omp_get_max_threads();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);

  PnmmObjective objective(Y, dims, timeline, anchor, cfg);
  SolverState state;
  state.vars = std::move(init);
  project_variables(state.vars, cfg);
  Variables& v = state.vars;

  const Index K = v.M.cols();
  const Index V = v.alpha.cols();
  state.lipschitz.m.assign(std::size_t(K), 0.0);
  state.lipschitz.b.assign(std::size_t(V + 1), 0.0);
  state.lipschitz.alpha = Matrix::Zero(K - 1, V);

  state.history.push_back({0, objective.evaluate(v)});
  require_finite(state.history.back().terms, 0);
  auto notify = [&](const std::string& name) {
    if (observer) observer(name, v);
  };

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const bool m_fixed = !cfg.update_M || t <= cfg.warmup_fixed_M_iters;

    if (!m_fixed) {
      for (Index k = 0; k < K; ++k) {
        const auto g = objective.grad_m(v, k);
        state.lipschitz.m[std::size_t(k)] = g.lipschitz;
        if (g.lipschitz <= 0.0) continue;
        v.M.col(k) = (v.M.col(k) - (cfg.gamma / g.lipschitz) * g.gradient).cwiseMax(0.0);
        notify("m" + std::to_string(k + 1));
      }
    }

    if (cfg.update_A) {
      const auto g = objective.grad_a(v);
      state.lipschitz.a = g.lipschitz;
      if (g.lipschitz > 0.0) {
        if (cfg.per_voxel_steps) {
          const Vector step = cfg.gamma * g.column_lipschitz.cwiseInverse();
          v.A = project_simplex_columns(v.A - g.gradient * step.asDiagonal());
        } else {
          v.A = project_simplex_columns(v.A - (cfg.gamma / g.lipschitz) * g.gradient);
        }
        notify("A");
      }
    }

    if (cfg.update_B) {
      for (Index i = 0; i <= V; ++i) {
        const auto g = objective.grad_b(v, i);
        state.lipschitz.b[std::size_t(i)] = g.lipschitz;
        if (g.lipschitz <= 0.0) continue;
        auto& Bi = v.B[std::size_t(i)];
        if (cfg.per_voxel_steps) {
          // A zero constant means the column does not enter the data term,
          // so its exact minimizer is 0 (infinite threshold).
          const Vector& Ln = g.column_lipschitz;
          Vector step(Ln.size()), thresh(Ln.size());
          for (Index n = 0; n < Ln.size(); ++n) {
            step[n] = Ln[n] > 0.0 ? cfg.gamma / Ln[n] : 0.0;
            thresh[n] = Ln[n] > 0.0 ? step[n] * cfg.lambda : std::numeric_limits<double>::infinity();
          }
          Bi = prox_group_box_columns(Bi - g.gradient * step.asDiagonal(), thresh, cfg.b_bounds[std::size_t(i)]);
        } else {
          const double step = cfg.gamma / g.lipschitz;
          Bi = prox_group_box(Bi - step * g.gradient, step * cfg.lambda, cfg.b_bounds[std::size_t(i)]);
        }
        notify("B" + std::to_string(i));
      }
    }

    if (cfg.update_alpha) {
      for (Index i = 1; i <= V; ++i) {
        const auto& bd = cfg.alpha_bounds[std::size_t(i - 1)];
        for (Index k = 0; k < K - 1; ++k) {
          const auto g = objective.grad_alpha(v, k, i);
          state.lipschitz.alpha(k, i - 1) = g.lipschitz;
          if (g.lipschitz <= 0.0) continue;
          const double next = v.alpha(k, i - 1) - (cfg.gamma / g.lipschitz) * g.gradient;
          v.alpha(k, i - 1) = std::clamp(next, g.floor, bd.hi);
          notify("alpha" + std::to_string(k + 1) + std::to_string(i));
        }
      }
    }

    state.history.push_back({t, objective.evaluate(v)});
    state.iterations = t;
    require_finite(state.history.back().terms, t);

    const double prev = state.history[state.history.size() - 2].terms.total;
    const double curr = state.history.back().terms.total;
    const double change = prev > 0.0 ? std::abs(curr - prev) / prev : 0.0;
    spdlog::debug("palm iter {} J={:.8e} rel_change={:.3e}", t, curr, change);
    if (m_fixed && cfg.update_M) continue;  // warm-up: M not updated yet
    if (change < cfg.epsilon) {
      state.stop = StopReason::converged;
      break;
    }
  }

  if (cfg.threads > 0) omp_set_num_threads(saved_threads);
  return state;
}

Vector trapezoid_auc(const Matrix& tacs, const AcquisitionTimeline& timeline) {
  const Vector& t = timeline.mid_times;
  if (tacs.rows() != t.size()) throw DomainError("trapezoid_auc: TAC length != frame count");
  Vector auc = Vector::Zero(tacs.cols());
  for (Index l = 1; l < t.size(); ++l)
    auc += 0.5 * (t[l] - t[l - 1]) * (tacs.row(l) + tacs.row(l - 1)).transpose();
  return auc;
}

Matrix init_factors_from_auc(const Matrix& Y, const std::vector<std::vector<Index>>& masks,
                             const AcquisitionTimeline& timeline) {
  Matrix M(Y.rows(), Index(masks.size()));
  for (std::size_t c = 0; c < masks.size(); ++c) {
    const auto& mask = masks[c];
    if (mask.empty()) throw DomainError("init_factors_from_auc: class " + std::to_string(c) + " has no voxels");
    Matrix tacs(Y.rows(), Index(mask.size()));
    for (std::size_t j = 0; j < mask.size(); ++j) tacs.col(Index(j)) = Y.col(mask[j]);

    if (mask.size() < 10) {
      spdlog::warn("class {} has only {} voxels; using the plain mean TAC", c, mask.size());
      M.col(Index(c)) = tacs.rowwise().mean();
      continue;
    }

    const Vector auc = trapezoid_auc(tacs, timeline);
    std::vector<Index> order(mask.size());
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return auc[a] < auc[b]; });

    // 1-based ranks r with 0.1 n < r <= 0.2 n
    const double n = double(mask.size());
    Vector sum = Vector::Zero(Y.rows());
    int count = 0;
    for (std::size_t r = 1; r <= mask.size(); ++r) {
      if (double(r) > 0.1 * n && double(r) <= 0.2 * n) {
        sum += tacs.col(order[r - 1]);
        ++count;
      }
    }
    M.col(Index(c)) = sum / double(count);
  }
  return M;
}

UnmixResult unmix_from_masks(const Matrix& Y, GridDims dims, const AcquisitionTimeline& timeline,
                             const std::vector<std::vector<Index>>& masks, const SolverConfig& cfg,
                             const BlockObserver& observer) {
  cfg.validate();
  if (Y.cols() != dims.voxels()) throw DomainError("unmix: voxel count != grid size");
  const Matrix M0 = init_factors_from_auc(Y, masks, timeline);
  Matrix A0 = Matrix::Zero(Index(masks.size()), Y.cols());
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (Index n : masks[k]) A0(Index(k), n) = 1.0;
  for (Index n = 0; n < Y.cols(); ++n)
    if (A0.col(n).sum() == 0.0) A0.col(n).setConstant(1.0 / double(A0.rows()));

  SolverConfig pre = cfg;
  pre.update_M = false;
  pre.update_A = false;
  pre.warmup_fixed_M_iters = 0;

  UnmixResult r;
  r.prepass = palm_run(Y, dims, timeline, initial_kinetics(M0, A0, cfg), M0, pre);
  r.init = r.prepass.vars;
  r.final = palm_run(Y, dims, timeline, r.init, M0, cfg, observer);
  return r;
}

void write_objective_csv(std::ostream& os, const SolverState& state) {
  os << "iteration,J,data,smoothness,anchor,sparsity\n";
  os.precision(17);
  for (const auto& rec : state.history)
    os << rec.iteration << ',' << rec.terms.total << ',' << rec.terms.data << ',' << rec.terms.smoothness << ','
       << rec.terms.anchor << ',' << rec.terms.sparsity << '\n';
}

}  // namespace pnmm
