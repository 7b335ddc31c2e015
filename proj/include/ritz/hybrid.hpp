#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ritz/block_lanczos.hpp"
#include "ritz/errors.hpp"
#include "ritz/lobpcg.hpp"
#include "ritz/report.hpp"
#include "ritz/rmm_diis.hpp"

namespace ritz {

/// Average relative change of the approximate eigenvalues between two
/// consecutive iterations; the hybrid switch monitors this.
inline double compute_tau(std::span<const double> theta_prev, std::span<const double> theta_cur) {
  if (theta_prev.size() != theta_cur.size() || theta_cur.empty())
    throw DimensionError("compute_tau: need equal, non-empty value lists");
  double sum = 0.0;
  for (std::size_t j = 0; j < theta_cur.size(); ++j) {
    const double denom = std::max(std::abs(theta_cur[j]), 1e-30);
    const double d = (theta_cur[j] - theta_prev[j]) / denom;
    sum += d * d;
  }
  return std::sqrt(sum) / static_cast<double>(theta_cur.size());
}

/// Two-phase solver: block Lanczos or LOBPCG until tau drops below the switch
/// threshold (or instability / iteration cap), then RMM-DIIS refinement of the
/// phase-1 Ritz vectors.
template <class Op>
std::pair<EigenReport, SolveStats> hybrid_solve(const Op& a, const ColumnBlock& x0,
                                                const HybridConfig& cfg) {
  const int n_ev = cfg.base.n_ev;
  if (!(cfg.tau_switch > 0.0)) throw DimensionError("hybrid: tau_switch must be positive");
  if (cfg.max_first_iters < 1) throw DimensionError("hybrid: max_first_iters must be positive");

  std::vector<double> tau_history;
  std::vector<double> prev_thetas;
  bool tau_fired = false;
  auto tau_step = [&](std::span<const double> thetas) {
    std::vector<double> cur(thetas.begin(), thetas.begin() + n_ev);
    bool stop = false;
    if (!prev_thetas.empty()) {
      const double tau = compute_tau(prev_thetas, cur);
      tau_history.push_back(tau);
      if (tau <= cfg.tau_switch) {
        tau_fired = true;
        stop = true;
      }
    }
    prev_thetas = std::move(cur);
    return stop;
  };

  EigenReport report1;
  SolveStats stats1;
  std::string phase1_name;
  if (cfg.first_phase == FirstPhase::block_lanczos) {
    phase1_name = "block-lanczos";
    auto [r, s] = block_lanczos_solve(
        a, x0, n_ev, cfg.base.tol, cfg.max_first_iters, cfg.base.seed,
        [&](const BlockLanczosView& v) { return tau_step(v.thetas); });
    report1 = std::move(r);
    stats1 = std::move(s);
  } else {
    phase1_name = "lobpcg";
    auto [r, s] = lobpcg_solve(a, x0, cfg.base.precond, n_ev, cfg.base.tol, cfg.max_first_iters,
                               [&](const LobpcgView& v) { return tau_step(v.thetas); });
    report1 = std::move(r);
    stats1 = std::move(s);
  }

  std::string switch_reason;
  switch (report1.status) {
    case SolveStatus::stopped: switch_reason = "tau"; break;
    case SolveStatus::unstable: switch_reason = "instability"; break;
    case SolveStatus::converged: switch_reason = "phase1-converged"; break;
    case SolveStatus::maxiter: switch_reason = "max-first-iters"; break;
  }
  if (tau_fired) switch_reason = "tau";

  if (static_cast<int>(report1.eigenvalues.size()) < n_ev)
    throw Error("hybrid: phase 1 produced no usable approximations (" + std::string(
                    to_string(report1.status)) + ", " + report1.note + ")");

  const BatchMode mode = cfg.spmm_strategy == SpmmStrategy::always_spmm
                             ? BatchMode::coupled_spmm
                             : BatchMode::decouple_after;
  auto [outcomes, stats2] =
      rmm_diis_refine(a, report1.eigenvectors, cfg.base.s_max, cfg.base.tol, cfg.base.maxiter,
                      mode, cfg.decouple_after, cfg.base.select_nearest);

  // Merge stats; phase marks record where phase 1 ended.
  SolveStats stats;
  stats.spmv_actual = stats1.spmv_actual + stats2.spmv_actual;
  stats.spmm_calls = stats1.spmm_calls + stats2.spmm_calls;
  stats.iterations = stats1.iterations + stats2.iterations;
  stats.history = stats1.history;
  stats.history.insert(stats.history.end(), stats2.history.begin(), stats2.history.end());
  stats.tau_history = std::move(tau_history);
  stats.condition_history = std::move(stats1.condition_history);
  stats.drift_checks = std::move(stats1.drift_checks);
  stats.drift_checks_p = std::move(stats1.drift_checks_p);
  for (const auto& [key, secs] : stats1.timings) stats.timings[key] += secs;
  for (const auto& [key, secs] : stats2.timings) stats.timings[key] += secs;
  stats.total_seconds = stats1.total_seconds + stats2.total_seconds;
  stats.phase_marks.emplace_back("phase1:" + phase1_name, 0);
  stats.phase_marks.emplace_back("switch:" + switch_reason, stats1.iterations);
  stats.phase_marks.emplace_back("phase2:rmm-diis", stats1.iterations);
  stats.phase_spmv.emplace_back("phase1", stats1.spmv_actual);
  stats.phase_spmv.emplace_back("phase2", stats2.spmv_actual);

  // Merge outcomes into an ascending-eigenvalue report.
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return outcomes[i].theta < outcomes[j].theta; });
  EigenReport report;
  report.eigenvectors = ColumnBlock(a.dim(), static_cast<Index>(outcomes.size()));
  bool all_converged = true;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const RefineOutcome& o = outcomes[order[k]];
    report.eigenvalues.push_back(o.theta);
    std::copy(o.x.begin(), o.x.end(), report.eigenvectors.col(static_cast<Index>(k)).begin());
    report.rel_residuals.push_back(o.rel_residual);
    report.converged.push_back(o.converged);
    report.failure_flags.push_back(o.failure ? to_string(*o.failure) : "");
    all_converged &= o.converged;
  }
  report.status = all_converged ? SolveStatus::converged : SolveStatus::maxiter;
  report.note = "switch:" + switch_reason;
  return {std::move(report), std::move(stats)};
}

}  // namespace ritz
