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

struct BlockLanczosView {
  int k;                     // iteration = number of blocks in the basis
  const SmallMatrix& t;      // block tridiagonal projection, dim k*n_b
  const ColumnBlock& basis;  // n x (k*n_b)
  double w_fnorm;
  std::span<const double> thetas;     // lowest n_ev Ritz values
  std::span<const double> estimates;  // ||W||_F ||E_k^T q|| / |theta|
};
using BlockLanczosObserver = std::function<bool(const BlockLanczosView&)>;

/// Block Lanczos with full block Gram-Schmidt.  One SpMM on n_b columns per
/// iteration; the block tridiagonal projection grows by one diagonal block
/// V_j^T H V_j and the off-diagonal QR factor of the orthogonalized W.
template <class Op>
std::pair<EigenReport, SolveStats> block_lanczos_solve(const Op& a, const ColumnBlock& x0,
                                                       int n_ev, double tol, int maxiter,
                                                       std::uint64_t seed = 0,
                                                       const BlockLanczosObserver& observer = {}) {
  SolveStats stats;
  EigenReport report;
  {
    detail::RunTimer total_timer(stats);
    const Index n = a.dim();
    const Index n_b = x0.cols();
    if (x0.rows() != n) throw DimensionError("block_lanczos: X0 rows do not match matrix");
    if (n_ev < 1 || n_b < n_ev) throw DimensionError("block_lanczos: need n_b >= n_ev >= 1");
    if (!(tol > 0.0)) throw DimensionError("block_lanczos: tol must be positive");
    if (maxiter < 1) throw DimensionError("block_lanczos: maxiter must be positive");
    if (!x0.all_finite()) throw DimensionError("block_lanczos: X0 has non-finite entries");

    MeteredOp<Op> h(a, stats);
    Rng rng(seed ^ 0x6b79b0c5d2f1a3e7ull);

    ColumnBlock basis;
    {
      ScopedTimer t(stats.timings["ortho"]);
      basis = block_orthogonalize(ColumnBlock(), x0, rng).q;
    }
    std::vector<SmallMatrix> diag_blocks;
    std::vector<SmallMatrix> off_blocks;  // off_blocks[t] = V_{t+2}^T H V_{t+1}
    SmallMatrix t_mat;
    std::vector<double> thetas(static_cast<std::size_t>(n_ev));
    std::vector<double> estimates(static_cast<std::size_t>(n_ev));
    SymEig eig;
    double w_fnorm = 0.0;
    SolveStatus status = SolveStatus::maxiter;

    for (int k = 1; k <= maxiter; ++k) {
      const ColumnBlock v_k = basis.sub_cols((k - 1) * n_b, n_b);
      ColumnBlock u = h.apply_block(v_k);

      {
        ScopedTimer t(stats.timings["rayleigh_ritz"]);
        SmallMatrix ak = gram(v_k, u);
        for (Index j = 0; j < n_b; ++j)
          for (Index i = 0; i < j; ++i) {
            const double v = 0.5 * (ak.at(i, j) + ak.at(j, i));
            ak.at(i, j) = v;
            ak.at(j, i) = v;
          }
        diag_blocks.push_back(std::move(ak));

        const Index dim = k * n_b;
        t_mat = SmallMatrix(dim, dim);
        for (int blk = 0; blk < k; ++blk)
          for (Index j = 0; j < n_b; ++j)
            for (Index i = 0; i < n_b; ++i)
              t_mat.at(blk * n_b + i, blk * n_b + j) = diag_blocks[blk].at(i, j);
        for (int blk = 0; blk + 1 < k; ++blk)
          for (Index j = 0; j < n_b; ++j)
            for (Index i = 0; i < n_b; ++i) {
              const double v = off_blocks[blk].at(i, j);
              t_mat.at((blk + 1) * n_b + i, blk * n_b + j) = v;
              t_mat.at(blk * n_b + j, (blk + 1) * n_b + i) = v;
            }
        eig = sym_eig(t_mat);
      }

      ColumnBlock w = u;
      {
        ScopedTimer t(stats.timings["ortho"]);
        project_out_once(basis, w);
        project_out_once(basis, w);
      }
      w_fnorm = frob_norm(w);

      const Index dim = k * n_b;
      for (int j = 0; j < n_ev; ++j) {
        thetas[static_cast<std::size_t>(j)] = eig.values[static_cast<std::size_t>(j)];
        double tail = 0.0;
        for (Index i = dim - n_b; i < dim; ++i) tail += eig.vectors.at(i, j) * eig.vectors.at(i, j);
        estimates[static_cast<std::size_t>(j)] =
            w_fnorm * std::sqrt(tail) /
            std::max(std::abs(thetas[static_cast<std::size_t>(j)]), 1e-30);
      }

      stats.history.emplace_back();
      for (int j = 0; j < n_ev; ++j)
        stats.history.back().push_back(
            {thetas[static_cast<std::size_t>(j)], estimates[static_cast<std::size_t>(j)]});
      stats.iterations = k;

      bool stop_requested = false;
      if (observer)
        stop_requested = observer(BlockLanczosView{k, t_mat, basis, w_fnorm, thetas, estimates});

      if (std::all_of(estimates.begin(), estimates.end(), [&](double e) { return e < tol; })) {
        status = SolveStatus::converged;
        break;
      }
      if (stop_requested) {
        status = SolveStatus::stopped;
        break;
      }
      if (k == maxiter || basis.cols() + n_b > n) break;

      {
        ScopedTimer t(stats.timings["ortho"]);
        BlockOrtho next = block_orthogonalize(basis, w, rng);
        off_blocks.push_back(std::move(next.r));
        basis.append_cols(next.q);
      }
    }

    const int m = n_ev;
    report.eigenvalues.assign(eig.values.begin(), eig.values.begin() + m);
    SmallMatrix qsub(t_mat.rows(), m);
    for (int j = 0; j < m; ++j)
      for (Index i = 0; i < t_mat.rows(); ++i) qsub.at(i, j) = eig.vectors.at(i, j);
    report.eigenvectors = multiply(basis, qsub);
    report.rel_residuals.assign(estimates.begin(), estimates.end());
    report.converged.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
      report.converged[static_cast<std::size_t>(j)] = estimates[static_cast<std::size_t>(j)] < tol;
    report.failure_flags.assign(static_cast<std::size_t>(m), "");
    report.status = status;
  }
  return {std::move(report), std::move(stats)};
}

}  // namespace ritz
