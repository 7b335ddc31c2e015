#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/dense.hpp"
#include "ritz/errors.hpp"
#include "ritz/report.hpp"
#include "ritz/rng.hpp"
#include "ritz/stats.hpp"

namespace ritz {

/// Spectral mapping for the Chebyshev filter: the damped interval
/// [lambda_cut, lambda_ub] maps onto [-1, 1] through (t - center)/half_width.
struct FilterParams {
  int degree = 10;
  double lambda_cut = 0.0;
  double lambda_ub = 1.0;
  double center = 0.5;
  double half_width = 0.5;

  static FilterParams make(int degree, double lambda_cut, double lambda_ub) {
    if (degree < 1) throw DimensionError("FilterParams: degree must be >= 1");
    const double minw = 1e-8 * std::max(1.0, std::abs(lambda_ub));
    if (lambda_cut > lambda_ub)
      throw DimensionError("FilterParams: lambda_cut exceeds lambda_ub");
    if (lambda_cut > lambda_ub - minw) lambda_cut = lambda_ub - minw;
    FilterParams p;
    p.degree = degree;
    p.lambda_cut = lambda_cut;
    p.lambda_ub = lambda_ub;
    p.center = 0.5 * (lambda_cut + lambda_ub);
    p.half_width = 0.5 * (lambda_ub - lambda_cut);
    return p;
  }
};

/// Chebyshev polynomial of the first kind by the three-term recurrence.
inline double cheb_eval(int m, double t) {
  if (m < 0) throw DimensionError("cheb_eval: negative degree");
  if (m == 0) return 1.0;
  double prev = 1.0, cur = t;
  for (int k = 2; k <= m; ++k) {
    const double next = 2.0 * t * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace detail {

/// Y = T_d((A - cI)/e) Q given hq = A*Q; applies A another (d-1) times.
template <class MOp>
ColumnBlock filter_from_product(const MOp& h, const ColumnBlock& q, const ColumnBlock& hq,
                                const FilterParams& p) {
  const double c = p.center, e = p.half_width;
  ColumnBlock prev = q;
  ColumnBlock cur(q.rows(), q.cols());
  for (Index j = 0; j < q.cols(); ++j)
    for (Index i = 0; i < q.rows(); ++i) cur(i, j) = (hq(i, j) - c * q(i, j)) / e;
  ColumnBlock hw(q.rows(), q.cols());
  for (int k = 2; k <= p.degree; ++k) {
    h.apply_block(cur, hw);
    ColumnBlock next(q.rows(), q.cols());
    for (Index j = 0; j < q.cols(); ++j)
      for (Index i = 0; i < q.rows(); ++i)
        next(i, j) = 2.0 * (hw(i, j) - c * cur(i, j)) / e - prev(i, j);
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

/// Ten full-orthogonalization Lanczos steps from a seeded random start; used
/// to bracket the spectrum.  Applications are charged to the given operator.
template <class MOp>
FilterParams estimate_bounds_metered(const MOp& h, Index n_b, int degree, std::uint64_t seed) {
  const Index n = h.dim();
  if (n <= 10) throw DimensionError("estimate_spectral_bounds: need matrix dimension > 10");
  Rng rng(seed ^ 0x243f6a8885a308d3ull);
  const int steps = 10;
  ColumnBlock basis(n, 1);
  {
    double nrm = 0.0;
    for (Index i = 0; i < n; ++i) basis(i, 0) = rng.normal();
    nrm = norm2(basis.col(0));
    scale(basis.col(0), 1.0 / nrm);
  }
  std::vector<double> alpha, beta;
  std::vector<double> w(static_cast<std::size_t>(n));
  const double breakdown_tol = 1e-14 * h.frob_norm();
  double w_norm = 0.0;
  for (int k = 1; k <= steps; ++k) {
    h.apply(basis.col(k - 1), w);
    alpha.push_back(dot(basis.col(k - 1), w));
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < basis.cols(); ++j) axpy(-dot(basis.col(j), w), basis.col(j), w);
    w_norm = norm2(w);
    if (k == steps) break;
    if (w_norm < breakdown_tol) {
      beta.push_back(0.0);
      for (int attempt = 0; attempt < 100; ++attempt) {
        for (double& v : w) v = rng.normal();
        const double before = norm2(w);
        for (int pass = 0; pass < 2; ++pass)
          for (Index j = 0; j < basis.cols(); ++j) axpy(-dot(basis.col(j), w), basis.col(j), w);
        const double after = norm2(w);
        if (after > 1e-8 * before) {
          scale(w, 1.0 / after);
          break;
        }
      }
    } else {
      beta.push_back(w_norm);
      scale(w, 1.0 / w_norm);
    }
    ColumnBlock next(n, 1);
    std::copy(w.begin(), w.end(), next.col(0).begin());
    basis.append_cols(next);
  }
  const TridiagEig te = tridiag_eig_lastrow(alpha, beta);
  const double theta_top = te.values.back();
  const double res_top = w_norm * std::abs(te.last_row.back());
  const double lambda_ub = theta_top + res_top;
  const double midpoint = 0.5 * (te.values.front() + te.values.back());
  double lambda_cut = midpoint;
  if (static_cast<Index>(te.values.size()) > n_b)
    lambda_cut = te.values[static_cast<std::size_t>(n_b)];
  const double minw = 1e-8 * std::max(1.0, std::abs(lambda_ub));
  if (lambda_cut > lambda_ub - minw) lambda_cut = midpoint;  // degenerate estimate
  return FilterParams::make(degree, std::min(lambda_cut, lambda_ub), lambda_ub);
}

}  // namespace detail

/// Spectrum bracket from 10 Lanczos iterations: lambda_ub is the top Ritz
/// value plus its residual norm, lambda_cut the (n_b+1)-st Ritz value with a
/// midpoint fallback when that is unavailable or degenerate.
template <class Op>
FilterParams estimate_spectral_bounds(const Op& a, Index n_b, int degree = 10,
                                      std::uint64_t seed = 0) {
  SolveStats scratch;
  return detail::estimate_bounds_metered(MeteredOp<Op>(a, scratch), n_b, degree, seed);
}

/// Y = T_d((A - cI)/e) Q by the three-term recurrence; exactly d applications
/// of A.
template <class Op>
ColumnBlock chebyshev_filter(const Op& a, const ColumnBlock& q, const FilterParams& p) {
  if (p.degree < 2) throw DimensionError("chebyshev_filter: degree must be >= 2");
  if (q.rows() != a.dim()) throw DimensionError("chebyshev_filter: block rows mismatch");
  ColumnBlock hq(q.rows(), q.cols());
  a.apply_block(q, hq);
  return detail::filter_from_product(a, q, hq, p);
}

struct ChebfsiView {
  int outer;
  std::span<const double> thetas;
  std::span<const double> rel_residuals;
  int locked;
  const ColumnBlock& q;
};
using ChebfsiObserver = std::function<bool(const ChebfsiView&)>;

/// Chebyshev-filtered subspace iteration with deflation locking.  Each outer
/// iteration spends exactly degree applications per unlocked column: the
/// filter's first step reuses the cached H*Q from the previous Rayleigh-Ritz
/// and one fresh product after orthonormalization rebuilds the projection.
template <class Op>
std::pair<EigenReport, SolveStats> chebfsi_solve(const Op& a, const ColumnBlock& x0, int n_ev,
                                                 double tol, int maxiter, int degree = 10,
                                                 std::optional<double> lambda_cut_override = {},
                                                 std::uint64_t seed = 0,
                                                 const ChebfsiObserver& observer = {}) {
  SolveStats stats;
  EigenReport report;
  {
    detail::RunTimer total_timer(stats);
    const Index n = a.dim();
    const Index n_b = x0.cols();
    if (x0.rows() != n) throw DimensionError("chebfsi: X0 rows do not match matrix");
    if (n_ev < 1 || n_b < n_ev) throw DimensionError("chebfsi: need n_b >= n_ev >= 1");
    if (!(tol > 0.0)) throw DimensionError("chebfsi: tol must be positive");
    if (maxiter < 1) throw DimensionError("chebfsi: maxiter must be positive");
    if (degree < 2) throw DimensionError("chebfsi: degree must be >= 2");

    MeteredOp<Op> h(a, stats);
    Rng rng(seed ^ 0x452821e638d01377ull);

    FilterParams params = detail::estimate_bounds_metered(h, n_b, degree, seed);
    if (lambda_cut_override)
      params = FilterParams::make(degree, *lambda_cut_override, params.lambda_ub);

    ColumnBlock q;
    {
      ScopedTimer t(stats.timings["ortho"]);
      try {
        q = cholesky_qr(x0).q;
      } catch (const RankDeficiencyError&) {
        q = block_orthogonalize(ColumnBlock(), x0, rng).q;
      }
    }
    ColumnBlock hq = h.apply_block(q);

    std::vector<double> theta(static_cast<std::size_t>(n_b));
    std::vector<double> relres(static_cast<std::size_t>(n_b));
    std::vector<bool> locked(static_cast<std::size_t>(n_b), false);

    auto rayleigh_ritz_rotate = [&]() {
      ScopedTimer t(stats.timings["rayleigh_ritz"]);
      SmallMatrix tm = gram(q, hq);
      for (Index j = 0; j < n_b; ++j)
        for (Index i = 0; i < j; ++i) {
          const double v = 0.5 * (tm.at(i, j) + tm.at(j, i));
          tm.at(i, j) = v;
          tm.at(j, i) = v;
        }
      const SymEig eig = sym_eig(tm);
      q = multiply(q, eig.vectors);
      hq = multiply(hq, eig.vectors);
      theta = eig.values;
      for (Index j = 0; j < n_b; ++j) {
        std::vector<double> rj(hq.col(j).begin(), hq.col(j).end());
        axpy(-theta[static_cast<std::size_t>(j)], q.col(j), rj);
        relres[static_cast<std::size_t>(j)] =
            norm2(rj) / std::max(std::abs(theta[static_cast<std::size_t>(j)]), 1e-30);
      }
    };
    auto converged_count = [&]() {
      int c = 0;
      for (int j = 0; j < n_ev; ++j)
        if (relres[static_cast<std::size_t>(j)] < tol) ++c;
      return c;
    };
    auto update_locks = [&]() {
      for (Index j = 0; j < n_b; ++j)
        if (relres[static_cast<std::size_t>(j)] < tol) locked[static_cast<std::size_t>(j)] = true;
    };

    rayleigh_ritz_rotate();
    update_locks();
    SolveStatus status =
        converged_count() == n_ev ? SolveStatus::converged : SolveStatus::maxiter;

    if (status != SolveStatus::converged) {
      for (int outer = 1; outer <= maxiter; ++outer) {
        std::vector<Index> unlocked_idx, locked_idx;
        for (Index j = 0; j < n_b; ++j)
          (locked[static_cast<std::size_t>(j)] ? locked_idx : unlocked_idx).push_back(j);
        stats.locked_history.push_back(static_cast<int>(locked_idx.size()));
        if (unlocked_idx.empty()) break;

        // Tighten the cutoff as the top of the computed block settles.
        const double top = theta[static_cast<std::size_t>(n_b - 1)];
        const double minw = 1e-8 * std::max(1.0, std::abs(params.lambda_ub));
        if (top > params.lambda_cut && top < params.lambda_ub - minw)
          params = FilterParams::make(degree, top, params.lambda_ub);

        const Index u = static_cast<Index>(unlocked_idx.size());
        ColumnBlock qu(n, u), hqu(n, u);
        for (Index c = 0; c < u; ++c) {
          const Index j = unlocked_idx[static_cast<std::size_t>(c)];
          std::copy(q.col(j).begin(), q.col(j).end(), qu.col(c).begin());
          std::copy(hq.col(j).begin(), hq.col(j).end(), hqu.col(c).begin());
        }
        ColumnBlock y = detail::filter_from_product(h, qu, hqu, params);

        ColumnBlock locked_block(n, static_cast<Index>(locked_idx.size()));
        for (Index c = 0; c < locked_block.cols(); ++c) {
          const Index j = locked_idx[static_cast<std::size_t>(c)];
          std::copy(q.col(j).begin(), q.col(j).end(), locked_block.col(c).begin());
        }
        ColumnBlock qn;
        {
          ScopedTimer t(stats.timings["ortho"]);
          try {
            ColumnBlock yp = y;
            project_out_once(locked_block, yp);
            project_out_once(locked_block, yp);
            qn = cholesky_qr(yp).q;
          } catch (const RankDeficiencyError&) {
            qn = block_orthogonalize(locked_block, y, rng).q;
          }
        }
        ColumnBlock un = h.apply_block(qn);
        for (Index c = 0; c < u; ++c) {
          const Index j = unlocked_idx[static_cast<std::size_t>(c)];
          std::copy(qn.col(c).begin(), qn.col(c).end(), q.col(j).begin());
          std::copy(un.col(c).begin(), un.col(c).end(), hq.col(j).begin());
        }

        rayleigh_ritz_rotate();
        stats.history.emplace_back();
        for (int j = 0; j < n_ev; ++j)
          stats.history.back().push_back(
              {theta[static_cast<std::size_t>(j)], relres[static_cast<std::size_t>(j)]});
        stats.iterations = outer;
        update_locks();

        bool stop_requested = false;
        if (observer)
          stop_requested = observer(ChebfsiView{
              outer, theta, relres,
              static_cast<int>(std::count(locked.begin(), locked.end(), true)), q});

        if (converged_count() == n_ev) {
          status = SolveStatus::converged;
          break;
        }
        if (stop_requested) {
          status = SolveStatus::stopped;
          break;
        }
      }
    }

    report.eigenvalues.assign(theta.begin(), theta.begin() + n_ev);
    report.eigenvectors = q.sub_cols(0, n_ev);
    report.rel_residuals.assign(relres.begin(), relres.begin() + n_ev);
    report.converged.resize(static_cast<std::size_t>(n_ev));
    for (int j = 0; j < n_ev; ++j)
      report.converged[static_cast<std::size_t>(j)] = relres[static_cast<std::size_t>(j)] < tol;
    report.failure_flags.assign(static_cast<std::size_t>(n_ev), "");
    report.status = status;
  }
  return {std::move(report), std::move(stats)};
}

}  // namespace ritz
