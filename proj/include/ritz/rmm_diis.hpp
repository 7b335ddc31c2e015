#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/dense.hpp"
#include "ritz/errors.hpp"
#include "ritz/report.hpp"
#include "ritz/stats.hpp"

namespace ritz {

enum class RefineFailure { maxiter, stagnation };

inline const char* to_string(RefineFailure f) {
  return f == RefineFailure::maxiter ? "maxiter" : "stagnation";
}

/// Result of refining a single eigenvector target.
struct RefineOutcome {
  double theta = 0.0;
  std::vector<double> x;
  double rel_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  std::optional<RefineFailure> failure;
};

/// Sliding window of previous iterates, residuals, Ritz values and cached
/// H*x products; oldest entries are evicted beyond s_max.
struct DiisHistory {
  int s_max = 15;
  std::deque<std::vector<double>> xs;
  std::deque<std::vector<double>> rs;
  std::deque<std::vector<double>> hxs;
  std::deque<double> thetas;

  void push(std::vector<double> x, std::vector<double> r, std::vector<double> hx, double theta) {
    xs.push_back(std::move(x));
    rs.push_back(std::move(r));
    hxs.push_back(std::move(hx));
    thetas.push_back(theta);
    while (static_cast<int>(xs.size()) > s_max) {
      xs.pop_front();
      rs.pop_front();
      hxs.pop_front();
      thetas.pop_front();
    }
  }
  int size() const { return static_cast<int>(xs.size()); }
};

namespace detail {

struct TwoByTwo {
  double theta;
  double g1, g2;
  bool degenerate;
};

/// Solve the 2x2 pencil ([x r]^T H [x r]) g = theta ([x r]^T [x r]) g and pick
/// the smaller Ritz value (or the one nearest theta_ref when requested).
inline TwoByTwo two_by_two_core(double hxx, double hxr, double hrr, double bxx, double bxr,
                                double brr, double theta_ref, bool select_nearest) {
  SmallMatrix a2(2, 2), b2(2, 2);
  a2.at(0, 0) = hxx;
  a2.at(0, 1) = hxr;
  a2.at(1, 0) = hxr;
  a2.at(1, 1) = hrr;
  b2.at(0, 0) = bxx;
  b2.at(0, 1) = bxr;
  b2.at(1, 0) = bxr;
  b2.at(1, 1) = brr;
  SymEig eig;
  try {
    eig = sym_gen_eig(a2, b2);
  } catch (const CholeskyError&) {
    return {theta_ref, 1.0, 0.0, true};  // r parallel to x: treat as converged
  }
  int pick = 0;
  if (select_nearest &&
      std::abs(eig.values[1] - theta_ref) < std::abs(eig.values[0] - theta_ref))
    pick = 1;
  return {eig.values[static_cast<std::size_t>(pick)], eig.vectors.at(0, pick),
          eig.vectors.at(1, pick), false};
}

}  // namespace detail

/// One residual-minimization step: project H into span{x_tilde, r_tilde} and
/// return the Ritz pair with the smaller value.  A negligible or parallel
/// residual returns the input pair unchanged.
template <class Op>
std::pair<double, std::vector<double>> two_by_two_rr(const Op& a, std::span<const double> x_tilde,
                                                     std::span<const double> r_tilde,
                                                     bool select_nearest = false) {
  const double xn = norm2(x_tilde);
  if (!(xn > 0.0)) throw DimensionError("two_by_two_rr: x_tilde is zero");
  std::vector<double> x(x_tilde.begin(), x_tilde.end());
  scale(x, 1.0 / xn);
  std::vector<double> r(r_tilde.begin(), r_tilde.end());
  scale(r, 1.0 / xn);
  const std::vector<double> hx = a.apply(x);
  const double theta_tilde = dot(x, hx);
  if (norm2(r) <= 1e-14 * std::abs(theta_tilde)) return {theta_tilde, std::move(x)};
  const std::vector<double> hr = a.apply(r);
  const auto tt = detail::two_by_two_core(dot(x, hx), dot(x, hr), dot(r, hr), dot(x, x),
                                          dot(x, r), dot(r, r), theta_tilde, select_nearest);
  if (tt.degenerate) return {theta_tilde, std::move(x)};
  std::vector<double> xn2(x.size(), 0.0);
  axpy(tt.g1, x, xn2);
  axpy(tt.g2, r, xn2);
  const double nrm = norm2(xn2);
  scale(xn2, 1.0 / nrm);
  return {tt.theta, std::move(xn2)};
}

/// Refine n_ev eigenvector targets independently with RMM-DIIS.  Targets never
/// see each other; batching only changes how the per-iteration H products are
/// scheduled (one SpMM over all targets in coupled mode, with converged
/// columns carried as passengers, or single SpMVs once `decouple_after`
/// targets have converged).
template <class Op>
std::pair<std::vector<RefineOutcome>, SolveStats> rmm_diis_refine(
    const Op& a, const ColumnBlock& x0, int s_max, double tol, int maxiter,
    BatchMode mode = BatchMode::coupled_spmm, int decouple_after = 0,
    bool select_nearest = false) {
  SolveStats stats;
  std::vector<RefineOutcome> outcomes;
  {
    detail::RunTimer total_timer(stats);
    const Index n = a.dim();
    const Index n_ev = x0.cols();
    if (x0.rows() != n) throw DimensionError("rmm_diis: target rows do not match matrix");
    if (n_ev < 1) throw DimensionError("rmm_diis: no targets");
    if (s_max < 1) throw DimensionError("rmm_diis: s_max must be >= 1");
    if (!(tol > 0.0)) throw DimensionError("rmm_diis: tol must be positive");
    if (maxiter < 1) throw DimensionError("rmm_diis: maxiter must be positive");

    MeteredOp<Op> h(a, stats);

    struct Target {
      DiisHistory hist;
      std::vector<double> xt, rt, hxt;  // staged x~, r~, H x~
      double theta_tilde = 0.0;
      bool needs_product = false;
      bool active = true;
      bool converged = false;
      std::optional<RefineFailure> failure;
      int iterations = 0;
      std::vector<double> relres_by_iter;
      double theta = 0.0;
      double relres = std::numeric_limits<double>::infinity();
    };
    std::vector<Target> targets(static_cast<std::size_t>(n_ev));

    int converged_count = 0;
    auto coupled_now = [&]() {
      if (mode == BatchMode::coupled_spmm) return true;
      return converged_count < decouple_after;
    };

    // Initialization: normalize targets and obtain H x0 for each.
    ColumnBlock xinit(n, n_ev);
    for (Index j = 0; j < n_ev; ++j) {
      const double nrm = norm2(x0.col(j));
      if (!(nrm > 0.0))
        throw DimensionError("rmm_diis: target " + std::to_string(j) + " is zero");
      for (Index i = 0; i < n; ++i) xinit(i, j) = x0(i, j) / nrm;
    }
    ColumnBlock hinit(n, n_ev);
    if (coupled_now()) {
      hinit = h.apply_block(xinit);
    } else {
      for (Index j = 0; j < n_ev; ++j) {
        std::vector<double> y = h.apply(xinit.col(j));
        std::copy(y.begin(), y.end(), hinit.col(j).begin());
      }
    }
    for (Index j = 0; j < n_ev; ++j) {
      Target& t = targets[static_cast<std::size_t>(j)];
      t.hist.s_max = s_max;
      std::vector<double> x(xinit.col(j).begin(), xinit.col(j).end());
      std::vector<double> hx(hinit.col(j).begin(), hinit.col(j).end());
      const double theta = dot(x, hx);
      std::vector<double> r = hx;
      axpy(-theta, x, r);
      t.theta = theta;
      t.relres = norm2(r) / std::max(std::abs(theta), 1e-30);
      t.hist.push(std::move(x), std::move(r), std::move(hx), theta);
    }

    for (int iter = 1; iter <= maxiter; ++iter) {
      bool any_active = false;
      for (auto& t : targets) any_active |= t.active;
      if (!any_active) break;

      // Stage the DIIS combinations.
      for (auto& t : targets) {
        if (!t.active) continue;
        if (t.hist.size() == 1) {
          t.xt = t.hist.xs.back();
          t.rt = t.hist.rs.back();
          t.hxt = t.hist.hxs.back();
        } else {
          std::vector<std::vector<double>> rs(t.hist.rs.begin(), t.hist.rs.end());
          const std::vector<double> alphas = diis_ls(rs);
          t.xt.assign(static_cast<std::size_t>(n), 0.0);
          t.rt.assign(static_cast<std::size_t>(n), 0.0);
          t.hxt.assign(static_cast<std::size_t>(n), 0.0);
          for (std::size_t k = 0; k < alphas.size(); ++k) {
            axpy(alphas[k], t.hist.xs[k], t.xt);
            axpy(alphas[k], t.hist.rs[k], t.rt);
            axpy(alphas[k], t.hist.hxs[k], t.hxt);
          }
          const double nu = norm2(t.xt);
          if (nu > 1e-300) {
            scale(t.xt, 1.0 / nu);
            scale(t.rt, 1.0 / nu);
            scale(t.hxt, 1.0 / nu);
          } else {
            t.xt = t.hist.xs.back();
            t.rt = t.hist.rs.back();
            t.hxt = t.hist.hxs.back();
          }
        }
        t.theta_tilde = dot(t.xt, t.hxt);
        t.needs_product = norm2(t.rt) > 1e-14 * std::abs(t.theta_tilde);
      }

      bool any_needs = false;
      for (auto& t : targets) any_needs |= (t.active && t.needs_product);

      // One batched product over all targets (passengers included) or
      // per-target single applications once decoupled.
      ColumnBlock hr_block;
      if (any_needs) {
        if (coupled_now()) {
          ColumnBlock in(n, n_ev);
          for (Index j = 0; j < n_ev; ++j) {
            const Target& t = targets[static_cast<std::size_t>(j)];
            const std::vector<double>& src =
                (t.active && t.needs_product) ? t.rt : t.hist.xs.back();
            std::copy(src.begin(), src.end(), in.col(j).begin());
          }
          hr_block = h.apply_block(in);
        } else {
          hr_block = ColumnBlock(n, n_ev);
          for (Index j = 0; j < n_ev; ++j) {
            Target& t = targets[static_cast<std::size_t>(j)];
            if (!(t.active && t.needs_product)) continue;
            const std::vector<double> y = h.apply(t.rt);
            std::copy(y.begin(), y.end(), hr_block.col(j).begin());
          }
        }
      }

      for (Index j = 0; j < n_ev; ++j) {
        Target& t = targets[static_cast<std::size_t>(j)];
        if (!t.active) continue;
        double theta_new;
        std::vector<double> x_new, hx_new;
        if (!t.needs_product) {
          theta_new = t.theta_tilde;
          x_new = t.xt;
          hx_new = t.hxt;
        } else {
          std::vector<double> hr(hr_block.col(j).begin(), hr_block.col(j).end());
          const auto tt = detail::two_by_two_core(
              dot(t.xt, t.hxt), dot(t.xt, hr), dot(t.rt, hr), dot(t.xt, t.xt), dot(t.xt, t.rt),
              dot(t.rt, t.rt), t.theta_tilde, select_nearest);
          if (tt.degenerate) {
            theta_new = t.theta_tilde;
            x_new = t.xt;
            hx_new = t.hxt;
          } else {
            theta_new = tt.theta;
            x_new.assign(static_cast<std::size_t>(n), 0.0);
            hx_new.assign(static_cast<std::size_t>(n), 0.0);
            axpy(tt.g1, t.xt, x_new);
            axpy(tt.g2, t.rt, x_new);
            axpy(tt.g1, t.hxt, hx_new);
            axpy(tt.g2, hr, hx_new);
            const double nrm = norm2(x_new);
            scale(x_new, 1.0 / nrm);
            scale(hx_new, 1.0 / nrm);
          }
        }
        std::vector<double> r_new = hx_new;
        axpy(-theta_new, x_new, r_new);
        const double relres = norm2(r_new) / std::max(std::abs(theta_new), 1e-30);
        t.theta = theta_new;
        t.relres = relres;
        t.iterations = iter;
        t.relres_by_iter.push_back(relres);
        t.hist.push(std::move(x_new), std::move(r_new), std::move(hx_new), theta_new);

        if (relres < tol) {
          t.active = false;
          t.converged = true;
          ++converged_count;
        } else if (t.relres_by_iter.size() >= 11 &&
                   relres > 0.99 * t.relres_by_iter[t.relres_by_iter.size() - 11]) {
          t.active = false;
          t.failure = RefineFailure::stagnation;
        } else if (iter == maxiter) {
          t.active = false;
          t.failure = RefineFailure::maxiter;
        }
      }

      stats.history.emplace_back();
      for (Index j = 0; j < n_ev; ++j)
        stats.history.back().push_back(
            {targets[static_cast<std::size_t>(j)].theta, targets[static_cast<std::size_t>(j)].relres});
      stats.iterations = iter;
    }

    outcomes.resize(static_cast<std::size_t>(n_ev));
    for (Index j = 0; j < n_ev; ++j) {
      Target& t = targets[static_cast<std::size_t>(j)];
      RefineOutcome& o = outcomes[static_cast<std::size_t>(j)];
      o.theta = t.theta;
      o.x = t.hist.xs.back();
      o.rel_residual = t.relres;
      o.converged = t.converged;
      o.iterations = t.iterations;
      o.failure = t.failure;
    }
  }
  return {std::move(outcomes), std::move(stats)};
}

}  // namespace ritz
