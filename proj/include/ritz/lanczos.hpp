#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/dense.hpp"
#include "ritz/errors.hpp"
#include "ritz/report.hpp"
#include "ritz/rng.hpp"
#include "ritz/stats.hpp"

namespace ritz {

/// Per-iteration snapshot handed to observers; returning true from the
/// observer requests an early stop.
struct LanczosView {
  int k;
  std::span<const double> alpha;
  std::span<const double> beta;
  const ColumnBlock& basis;  // n x k, orthonormal
  double w_norm;
  std::span<const double> thetas;     // lowest min(k, n_ev) Ritz values
  std::span<const double> estimates;  // matching relative residual estimates
};
using LanczosObserver = std::function<bool(const LanczosView&)>;

/// Average the initial guesses and normalize; the standard way to fold
/// several eigenvector guesses into a single Lanczos starting vector.
inline std::vector<double> build_initial_vector(const std::vector<std::vector<double>>& guesses) {
  if (guesses.empty()) throw DimensionError("build_initial_vector: no guesses");
  const std::size_t n = guesses.front().size();
  std::vector<double> v(n, 0.0);
  for (const auto& g : guesses) {
    if (g.size() != n) throw DimensionError("build_initial_vector: guess lengths differ");
    axpy(1.0 / static_cast<double>(guesses.size()), g, v);
  }
  const double nrm = norm2(v);
  if (!(nrm > 0.0)) throw Error("build_initial_vector: guesses sum to zero");
  scale(v, 1.0 / nrm);
  return v;
}

inline std::vector<double> build_initial_vector(const ColumnBlock& guesses) {
  std::vector<std::vector<double>> gs;
  for (Index j = 0; j < guesses.cols(); ++j)
    gs.emplace_back(guesses.col(j).begin(), guesses.col(j).end());
  return build_initial_vector(gs);
}

/// Single-vector Lanczos with full orthogonalization.  Convergence is judged
/// by the estimate ||w_k|| |e_k^T q| / |theta| for the lowest n_ev Ritz pairs.
template <class Op>
std::pair<EigenReport, SolveStats> lanczos_solve(const Op& a, std::span<const double> v0,
                                                 int n_ev, double tol, int maxiter,
                                                 std::uint64_t seed = 0,
                                                 const LanczosObserver& observer = {}) {
  SolveStats stats;
  EigenReport report;
  {
    detail::RunTimer total_timer(stats);
    const Index n = a.dim();
    if (static_cast<Index>(v0.size()) != n)
      throw DimensionError("lanczos: starting vector length does not match matrix");
    if (n_ev < 1 || n_ev > n) throw DimensionError("lanczos: invalid n_ev");
    if (!(tol > 0.0)) throw DimensionError("lanczos: tol must be positive");
    if (maxiter < 1) throw DimensionError("lanczos: maxiter must be positive");
    const double v0n = norm2(v0);
    if (!(v0n > 0.0)) throw DimensionError("lanczos: starting vector is zero");

    MeteredOp<Op> h(a, stats);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    const double breakdown_tol = 1e-14 * a.frob_norm();

    ColumnBlock basis(n, 1);
    for (Index i = 0; i < n; ++i) basis(i, 0) = v0[i] / v0n;
    std::vector<double> alpha, beta;
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<double> thetas, estimates;
    double w_norm = 0.0;

    SolveStatus status = SolveStatus::maxiter;
    const int kmax = static_cast<int>(std::min<Index>(maxiter, n));
    for (int k = 1; k <= kmax; ++k) {
      h.apply(basis.col(k - 1), w);
      alpha.push_back(dot(basis.col(k - 1), w));
      {
        ScopedTimer t(stats.timings["ortho"]);
        for (int pass = 0; pass < 2; ++pass)
          for (Index j = 0; j < basis.cols(); ++j) axpy(-dot(basis.col(j), w), basis.col(j), w);
      }
      w_norm = norm2(w);

      TridiagEig te;
      {
        ScopedTimer t(stats.timings["rayleigh_ritz"]);
        te = tridiag_eig_lastrow(alpha, beta);
      }
      const int m = std::min(k, n_ev);
      thetas.assign(te.values.begin(), te.values.begin() + m);
      estimates.resize(m);
      for (int j = 0; j < m; ++j)
        estimates[j] =
            w_norm * std::abs(te.last_row[static_cast<std::size_t>(j)]) /
            std::max(std::abs(thetas[static_cast<std::size_t>(j)]), 1e-30);

      stats.history.emplace_back();
      for (int j = 0; j < m; ++j)
        stats.history.back().push_back(
            {thetas[static_cast<std::size_t>(j)], estimates[static_cast<std::size_t>(j)]});
      stats.iterations = k;

      bool stop_requested = false;
      if (observer)
        stop_requested = observer(LanczosView{k, alpha, beta, basis, w_norm, thetas, estimates});

      if (k >= n_ev &&
          std::all_of(estimates.begin(), estimates.end(), [&](double e) { return e < tol; })) {
        status = SolveStatus::converged;
        break;
      }
      if (stop_requested) {
        status = SolveStatus::stopped;
        break;
      }
      if (k == kmax) break;

      ColumnBlock next(n, 1);
      if (w_norm < breakdown_tol) {
        // Breakdown: an invariant subspace was hit; continue with a random
        // vector orthogonalized against the basis so further pairs can emerge.
        beta.push_back(0.0);
        ScopedTimer t(stats.timings["ortho"]);
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
          for (double& v : w) v = rng.normal();
          const double before = norm2(w);
          for (int pass = 0; pass < 2; ++pass)
            for (Index j = 0; j < basis.cols(); ++j) axpy(-dot(basis.col(j), w), basis.col(j), w);
          const double after = norm2(w);
          if (after > 1e-8 * before) {
            scale(w, 1.0 / after);
            ok = true;
          }
        }
        if (!ok) break;  // no orthogonal complement left
      } else {
        beta.push_back(w_norm);
        scale(w, 1.0 / w_norm);
      }
      std::copy(w.begin(), w.end(), next.col(0).begin());
      basis.append_cols(next);
    }

    // Final Rayleigh-Ritz extraction over the full tridiagonal matrix.
    const int k = static_cast<int>(alpha.size());
    const int m = std::min(k, n_ev);
    SymEig fe;
    {
      ScopedTimer t(stats.timings["rayleigh_ritz"]);
      fe = tridiag_eig(alpha, beta);
    }
    SmallMatrix qsub(k, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < k; ++i) qsub.at(i, j) = fe.vectors.at(i, j);
    report.eigenvalues.assign(fe.values.begin(), fe.values.begin() + m);
    report.eigenvectors = multiply(basis, qsub);
    report.rel_residuals.resize(static_cast<std::size_t>(m));
    report.converged.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      const double est = w_norm * std::abs(fe.vectors.at(k - 1, j)) /
                         std::max(std::abs(fe.values[static_cast<std::size_t>(j)]), 1e-30);
      report.rel_residuals[static_cast<std::size_t>(j)] = est;
      report.converged[static_cast<std::size_t>(j)] = est < tol;
    }
    report.failure_flags.assign(static_cast<std::size_t>(m), "");
    report.status = status;
  }
  return {std::move(report), std::move(stats)};
}

}  // namespace ritz
