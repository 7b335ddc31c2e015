#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/dense.hpp"
#include "ritz/errors.hpp"
#include "ritz/report.hpp"
#include "ritz/stats.hpp"

namespace ritz {

/// Preconditioned gradient W = K^{-1} R.  With diagonal_shift, K is the
/// shifted matrix diagonal floored away from zero; with none, W = R.
inline ColumnBlock apply_preconditioner(const PreconditionerSpec& spec,
                                        std::span<const double> a_diag, const ColumnBlock& r,
                                        std::span<const double> thetas) {
  if (spec.kind == PrecondKind::none) return r;
  if (!(spec.floor > 0.0)) throw DimensionError("apply_preconditioner: floor must be positive");
  if (static_cast<Index>(a_diag.size()) != r.rows())
    throw DimensionError("apply_preconditioner: diagonal length mismatch");
  ColumnBlock w(r.rows(), r.cols());
  for (Index j = 0; j < r.cols(); ++j) {
    const double sigma =
        spec.fixed_shift ? *spec.fixed_shift : thetas[static_cast<std::size_t>(j)];
    for (Index i = 0; i < r.rows(); ++i)
      w(i, j) = r(i, j) / std::max(a_diag[static_cast<std::size_t>(i)] - sigma, spec.floor);
  }
  return w;
}

struct RayleighRitzResult {
  SmallMatrix c;              // coefficients in the S basis, C^T (S^T S) C = I
  std::vector<double> theta;  // ascending Ritz values
  int kept;                   // directions surviving the Gram-matrix safeguard
};

namespace detail {

/// Solve the projected pencil (S^T H S, S^T S) after dropping directions whose
/// Gram-matrix eigenvalue falls below 1e-14 of the largest one.
inline RayleighRitzResult rr_project(const SmallMatrix& shs, const SmallMatrix& sts, Index n_b,
                                     bool allow_partial) {
  const Index dim = sts.rows();
  const SymEig gram_eig = sym_eig(sts);
  const double mu_max = gram_eig.values.back();
  if (!(mu_max > 0.0)) throw SubspaceCollapseError("rayleigh_ritz: zero subspace", 0);
  std::vector<Index> keep;
  for (Index i = 0; i < dim; ++i)
    if (gram_eig.values[static_cast<std::size_t>(i)] >= 1e-14 * mu_max) keep.push_back(i);
  const Index kept = static_cast<Index>(keep.size());
  if (kept < n_b && !allow_partial)
    throw SubspaceCollapseError("rayleigh_ritz: subspace collapsed to dimension " +
                                    std::to_string(kept),
                                static_cast<int>(kept));
  // Whitened basis Y = Z_kept diag(mu^{-1/2}), then a standard eigenproblem.
  SmallMatrix y(dim, kept);
  for (Index c = 0; c < kept; ++c) {
    const double inv = 1.0 / std::sqrt(gram_eig.values[static_cast<std::size_t>(keep[c])]);
    for (Index i = 0; i < dim; ++i) y.at(i, c) = gram_eig.vectors.at(i, keep[c]) * inv;
  }
  SmallMatrix at = matmul(y.transposed(), matmul(shs, y));
  for (Index j = 0; j < kept; ++j)
    for (Index i = 0; i < j; ++i) {
      const double v = 0.5 * (at.at(i, j) + at.at(j, i));
      at.at(i, j) = v;
      at.at(j, i) = v;
    }
  const SymEig inner = sym_eig(at);
  const Index n_out = std::min(n_b, kept);
  SmallMatrix qsub(kept, n_out);
  for (Index j = 0; j < n_out; ++j)
    for (Index i = 0; i < kept; ++i) qsub.at(i, j) = inner.vectors.at(i, j);
  RayleighRitzResult out;
  out.c = matmul(y, qsub);
  out.theta.assign(inner.values.begin(), inner.values.begin() + n_out);
  out.kept = static_cast<int>(kept);
  return out;
}

}  // namespace detail

/// Rayleigh-Ritz over the columns of S: forms (S^T H S, S^T S) and returns the
/// n_b lowest Ritz pairs in S coordinates.  Throws SubspaceCollapseError when
/// fewer than n_b directions survive the conditioning safeguard.
template <class Op>
RayleighRitzResult rayleigh_ritz(const Op& a, const ColumnBlock& s, Index n_b) {
  if (s.rows() != a.dim()) throw DimensionError("rayleigh_ritz: S rows do not match matrix");
  ColumnBlock hs(s.rows(), s.cols());
  a.apply_block(s, hs);
  SmallMatrix shs = gram(s, hs);
  for (Index j = 0; j < shs.cols(); ++j)
    for (Index i = 0; i < j; ++i) {
      const double v = 0.5 * (shs.at(i, j) + shs.at(j, i));
      shs.at(i, j) = v;
      shs.at(j, i) = v;
    }
  return detail::rr_project(shs, gram(s, s), n_b, /*allow_partial=*/false);
}

struct LobpcgView {
  int i;
  std::span<const double> thetas;         // n_b current Ritz values
  std::span<const double> rel_residuals;  // true relative residuals, n_b
  int converged_count;                    // among the first n_ev
  const ColumnBlock& x;
  const ColumnBlock& hx;
};
using LobpcgObserver = std::function<bool(const LobpcgView&)>;

/// LOBPCG per the standard three-block recurrence.  H is applied once per
/// iteration (to the preconditioned residuals); H*X and H*P are maintained by
/// the update recurrences and recomputed every 10 iterations to bound drift.
template <class Op>
std::pair<EigenReport, SolveStats> lobpcg_solve(const Op& a, const ColumnBlock& x0,
                                                const PreconditionerSpec& precond, int n_ev,
                                                double tol, int maxiter,
                                                const LobpcgObserver& observer = {}) {
  SolveStats stats;
  EigenReport report;
  {
    detail::RunTimer total_timer(stats);
    const Index n = a.dim();
    const Index n_b = x0.cols();
    if (x0.rows() != n) throw DimensionError("lobpcg: X0 rows do not match matrix");
    if (n_ev < 1 || n_b < n_ev) throw DimensionError("lobpcg: need n_b >= n_ev >= 1");
    if (!(tol > 0.0)) throw DimensionError("lobpcg: tol must be positive");
    if (maxiter < 1) throw DimensionError("lobpcg: maxiter must be positive");
    if (!x0.all_finite()) throw DimensionError("lobpcg: X0 has non-finite entries");

    MeteredOp<Op> h(a, stats);
    const std::vector<double> diag = a.diagonal();
    PreconditionerSpec spec = precond;
    {
      const auto [lo, hi] = std::minmax_element(diag.begin(), diag.end());
      double floor = 1e-2 * (*hi - *lo);
      if (!(floor > 0.0)) {
        double mx = 0.0;
        for (double v : diag) mx = std::max(mx, std::abs(v));
        floor = 1e-2 * std::max(1.0, mx);
      }
      spec.floor = floor;
    }

    auto symmetrize = [](SmallMatrix& m) {
      for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < j; ++i) {
          const double v = 0.5 * (m.at(i, j) + m.at(j, i));
          m.at(i, j) = v;
          m.at(j, i) = v;
        }
    };

    ColumnBlock x = x0;
    ColumnBlock hx = h.apply_block(x);
    std::vector<double> theta;
    SolveStatus status = SolveStatus::maxiter;
    std::string note;

    {
      // Initial Rayleigh-Ritz directly on X0; a rank-deficient start shows up
      // here as a collapsed pencil.
      ScopedTimer t(stats.timings["rayleigh_ritz"]);
      SmallMatrix shs = gram(x, hx);
      symmetrize(shs);
      RayleighRitzResult rr = detail::rr_project(shs, gram(x, x), n_b, /*allow_partial=*/true);
      x = multiply(x, rr.c);
      hx = multiply(hx, rr.c);
      theta = rr.theta;
      if (rr.kept < n_b) {
        status = SolveStatus::unstable;
        note = "initial subspace collapsed to dimension " + std::to_string(rr.kept);
      }
    }

    ColumnBlock p, hp;  // empty until the second iteration
    std::vector<double> relres(theta.size());
    auto compute_residual_block = [&](ColumnBlock& r) {
      r = hx;
      for (Index j = 0; j < r.cols(); ++j) {
        axpy(-theta[static_cast<std::size_t>(j)], x.col(j), r.col(j));
        relres[static_cast<std::size_t>(j)] =
            norm2(r.col(j)) / std::max(std::abs(theta[static_cast<std::size_t>(j)]), 1e-30);
      }
    };

    if (status != SolveStatus::unstable) {
      ColumnBlock r;
      for (int i = 1; i <= maxiter; ++i) {
        compute_residual_block(r);
        int conv = 0;
        for (int j = 0; j < n_ev; ++j)
          if (relres[static_cast<std::size_t>(j)] < tol) ++conv;

        stats.history.emplace_back();
        for (int j = 0; j < n_ev; ++j)
          stats.history.back().push_back(
              {theta[static_cast<std::size_t>(j)], relres[static_cast<std::size_t>(j)]});
        stats.iterations = i;

        bool stop_requested = false;
        if (observer) stop_requested = observer(LobpcgView{i, theta, relres, conv, x, hx});

        if (conv == n_ev) {
          status = SolveStatus::converged;
          break;
        }
        if (stop_requested) {
          status = SolveStatus::stopped;
          break;
        }
        if (i == maxiter) break;

        ColumnBlock w = apply_preconditioner(spec, diag, r, theta);
        for (Index j = 0; j < n_b; ++j)
          if (relres[static_cast<std::size_t>(j)] < tol)
            std::fill(w.col(j).begin(), w.col(j).end(), 0.0);  // soft lock
        ColumnBlock hw = h.apply_block(w);

        ColumnBlock s = x;
        s.append_cols(w);
        ColumnBlock hs = hx;
        hs.append_cols(hw);
        if (!p.empty()) {
          s.append_cols(p);
          hs.append_cols(hp);
        }
        stats.condition_history.push_back(estimate_condition(s));

        RayleighRitzResult rr;
        {
          ScopedTimer t(stats.timings["rayleigh_ritz"]);
          SmallMatrix shs = gram(s, hs);
          symmetrize(shs);
          try {
            rr = detail::rr_project(shs, gram(s, s), n_b, /*allow_partial=*/false);
          } catch (const SubspaceCollapseError& e) {
            status = SolveStatus::unstable;
            note = e.what();
          }
        }
        if (status == SolveStatus::unstable) break;

        // Split coefficient rows by block and advance with the recurrences
        // HX <- HX Cx + HW Cw + HP Cp, HP <- HW Cw + HP Cp.
        const Index pcols = p.cols();
        SmallMatrix cx(n_b, n_b), cw(n_b, n_b), cp(pcols, n_b);
        for (Index j = 0; j < n_b; ++j) {
          for (Index i2 = 0; i2 < n_b; ++i2) {
            cx.at(i2, j) = rr.c.at(i2, j);
            cw.at(i2, j) = rr.c.at(n_b + i2, j);
          }
          for (Index i2 = 0; i2 < pcols; ++i2) cp.at(i2, j) = rr.c.at(2 * n_b + i2, j);
        }
        ColumnBlock x_new = multiply(x, cx);
        ColumnBlock hx_new = multiply(hx, cx);
        ColumnBlock p_new = multiply(w, cw);
        ColumnBlock hp_new = multiply(hw, cw);
        for (Index j = 0; j < n_b; ++j) {
          axpy(1.0, p_new.col(j), x_new.col(j));
          axpy(1.0, hp_new.col(j), hx_new.col(j));
        }
        if (pcols > 0) {
          ColumnBlock pc = multiply(p, cp);
          ColumnBlock hpc = multiply(hp, cp);
          for (Index j = 0; j < n_b; ++j) {
            axpy(1.0, pc.col(j), x_new.col(j));
            axpy(1.0, hpc.col(j), hx_new.col(j));
            axpy(1.0, pc.col(j), p_new.col(j));
            axpy(1.0, hpc.col(j), hp_new.col(j));
          }
        }
        x = std::move(x_new);
        hx = std::move(hx_new);
        p = std::move(p_new);
        hp = std::move(hp_new);
        theta = rr.theta;

        if (i % 10 == 0) {
          // Revalidate the cached products against fresh applications.
          ColumnBlock fresh = h.apply_block(x);
          double diff = 0.0;
          for (Index j = 0; j < n_b; ++j)
            for (Index i2 = 0; i2 < n; ++i2) {
              const double d2 = fresh(i2, j) - hx(i2, j);
              diff += d2 * d2;
            }
          const double err = std::sqrt(diff) / std::max(frob_norm(fresh), 1e-300);
          stats.drift_checks.emplace_back(i, err);
          hx = std::move(fresh);
          ColumnBlock fresh_p = h.apply_block(p);
          double diff_p = 0.0;
          for (Index j = 0; j < p.cols(); ++j)
            for (Index i2 = 0; i2 < n; ++i2) {
              const double d2 = fresh_p(i2, j) - hp(i2, j);
              diff_p += d2 * d2;
            }
          const double err_p = std::sqrt(diff_p) / std::max(frob_norm(fresh_p), 1e-300);
          stats.drift_checks_p.emplace_back(i, err_p);
          hp = std::move(fresh_p);
        }
      }
    }

    const int m = std::min<Index>(n_ev, static_cast<Index>(theta.size()));
    report.eigenvalues.assign(theta.begin(), theta.begin() + m);
    report.eigenvectors = x.sub_cols(0, m);
    report.rel_residuals.resize(static_cast<std::size_t>(m));
    report.converged.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      std::vector<double> rj(hx.col(j).begin(), hx.col(j).end());
      axpy(-theta[static_cast<std::size_t>(j)], x.col(j), rj);
      const double rr_ = norm2(rj) / std::max(std::abs(theta[static_cast<std::size_t>(j)]), 1e-30);
      report.rel_residuals[static_cast<std::size_t>(j)] = rr_;
      report.converged[static_cast<std::size_t>(j)] = rr_ < tol;
    }
    report.failure_flags.assign(static_cast<std::size_t>(m), "");
    report.status = status;
    report.note = note;
  }
  return {std::move(report), std::move(stats)};
}

}  // namespace ritz
