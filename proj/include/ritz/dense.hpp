#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/errors.hpp"
#include "ritz/rng.hpp"

namespace ritz {

/// Dense m x k matrix, column-major.  Small by construction: projected
/// pencils, Gram matrices, QR factors and coefficient blocks.
class SmallMatrix {
 public:
  SmallMatrix() = default;
  SmallMatrix(Index r, Index c) : r_(r), c_(c), a_(static_cast<std::size_t>(r * c), 0.0) {}

  static SmallMatrix identity(Index m) {
    SmallMatrix z(m, m);
    for (Index i = 0; i < m; ++i) z.at(i, i) = 1.0;
    return z;
  }

  Index rows() const { return r_; }
  Index cols() const { return c_; }

  double& at(Index i, Index j) { return a_[static_cast<std::size_t>(j * r_ + i)]; }
  double at(Index i, Index j) const { return a_[static_cast<std::size_t>(j * r_ + i)]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (Index i = 0; i < std::min(r_, c_); ++i) t += at(i, i);
    return t;
  }

  double frob_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  SmallMatrix transposed() const {
    SmallMatrix t(c_, r_);
    for (Index j = 0; j < c_; ++j)
      for (Index i = 0; i < r_; ++i) t.at(j, i) = at(i, j);
    return t;
  }

 private:
  Index r_ = 0, c_ = 0;
  std::vector<double> a_;
};

inline SmallMatrix matmul(const SmallMatrix& a, const SmallMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  SmallMatrix c(a.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j)
    for (Index k = 0; k < a.cols(); ++k) {
      const double bkj = b.at(k, j);
      if (bkj == 0.0) continue;
      for (Index i = 0; i < a.rows(); ++i) c.at(i, j) += a.at(i, k) * bkj;
    }
  return c;
}

/// x^T y for column blocks.
inline SmallMatrix gram(const ColumnBlock& x, const ColumnBlock& y) {
  if (x.rows() != y.rows()) throw DimensionError("gram: row mismatch");
  SmallMatrix g(x.cols(), y.cols());
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < x.cols(); ++i) g.at(i, j) = dot(x.col(i), y.col(j));
  return g;
}

/// x * c for a column block and a small coefficient matrix.
inline ColumnBlock multiply(const ColumnBlock& x, const SmallMatrix& c) {
  if (x.cols() != c.rows()) throw DimensionError("multiply: inner dimensions differ");
  ColumnBlock y(x.rows(), c.cols());
  for (Index j = 0; j < c.cols(); ++j)
    for (Index k = 0; k < x.cols(); ++k) {
      const double ckj = c.at(k, j);
      if (ckj != 0.0) axpy(ckj, x.col(k), y.col(j));
    }
  return y;
}

/// w -= basis * c
inline void subtract_multiplied(ColumnBlock& w, const ColumnBlock& basis, const SmallMatrix& c) {
  for (Index j = 0; j < w.cols(); ++j)
    for (Index k = 0; k < basis.cols(); ++k) {
      const double ckj = c.at(k, j);
      if (ckj != 0.0) axpy(-ckj, basis.col(k), w.col(j));
    }
}

/// One pass of w -= basis (basis^T w).
inline void project_out_once(const ColumnBlock& basis, ColumnBlock& w) {
  if (basis.empty()) return;
  subtract_multiplied(w, basis, gram(basis, w));
}

namespace detail {

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Throws CholeskyError carrying the failing pivot index.
inline SmallMatrix cholesky_lower(const SmallMatrix& a) {
  const Index m = a.rows();
  if (a.cols() != m) throw DimensionError("cholesky: matrix not square");
  double max_diag = 0.0;
  for (Index i = 0; i < m; ++i) max_diag = std::max(max_diag, std::abs(a.at(i, i)));
  const double pivot_tol =
      static_cast<double>(m) * std::numeric_limits<double>::epsilon() * max_diag;
  SmallMatrix l(m, m);
  for (Index j = 0; j < m; ++j) {
    double s = a.at(j, j);
    for (Index k = 0; k < j; ++k) s -= l.at(j, k) * l.at(j, k);
    if (!(s > pivot_tol))
      throw CholeskyError("cholesky: non-positive pivot at index " + std::to_string(j),
                          static_cast<int>(j));
    l.at(j, j) = std::sqrt(s);
    for (Index i = j + 1; i < m; ++i) {
      double t = a.at(i, j);
      for (Index k = 0; k < j; ++k) t -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = t / l.at(j, j);
    }
  }
  return l;
}

/// Solve L x = b in place (L lower triangular).
inline void forward_solve(const SmallMatrix& l, std::span<double> b) {
  const Index m = l.rows();
  for (Index i = 0; i < m; ++i) {
    double s = b[i];
    for (Index k = 0; k < i; ++k) s -= l.at(i, k) * b[k];
    b[i] = s / l.at(i, i);
  }
}

/// Solve L^T x = b in place.
inline void back_solve_transposed(const SmallMatrix& l, std::span<double> b) {
  const Index m = l.rows();
  for (Index i = m - 1; i >= 0; --i) {
    double s = b[i];
    for (Index k = i + 1; k < m; ++k) s -= l.at(k, i) * b[k];
    b[i] = s / l.at(i, i);
  }
}

/// QL with implicit shifts on a tridiagonal matrix given by diagonal d and
/// subdiagonal e (e[i] couples i and i+1; e[m-1] is workspace).  z, when not
/// null, is a zrows x m row-major buffer whose columns follow the rotations.
inline void ql_implicit(std::vector<double>& d, std::vector<double>& e, double* z, Index zrows) {
  const Index m = static_cast<Index>(d.size());
  if (m == 0) return;
  e[static_cast<std::size_t>(m - 1)] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (Index l = 0; l < m; ++l) {
    int iter = 0;
    Index split;
    do {
      for (split = l; split < m - 1; ++split) {
        const double dd = std::abs(d[split]) + std::abs(d[split + 1]);
        if (std::abs(e[split]) <= eps * dd) break;
      }
      if (split != l) {
        if (iter++ == 60) throw Error("ql_implicit: no convergence after 60 iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[split] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        Index i = split - 1;
        for (; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[split] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (Index t = 0; t < zrows; ++t) {
            double* zr = z + t * m;
            f = zr[i + 1];
            zr[i + 1] = s * zr[i] + c * f;
            zr[i] = c * zr[i] - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[split] = 0.0;
      }
    } while (split != l);
  }
}

/// Sort eigenvalues ascending, permuting the tracked z columns along.
inline void sort_ascending(std::vector<double>& d, double* z, Index zrows) {
  const Index m = static_cast<Index>(d.size());
  for (Index i = 0; i < m - 1; ++i) {
    Index kmin = i;
    for (Index j = i + 1; j < m; ++j)
      if (d[j] < d[kmin]) kmin = j;
    if (kmin != i) {
      std::swap(d[i], d[kmin]);
      for (Index t = 0; t < zrows; ++t) std::swap(z[t * m + i], z[t * m + kmin]);
    }
  }
}

/// Householder reduction to tridiagonal form with accumulation of the
/// orthogonal transformation (classic tred2).  z enters as the symmetric
/// matrix (row-major) and leaves as the transformation matrix.
inline void tred2(std::vector<double>& z, Index m, std::vector<double>& d,
                  std::vector<double>& e) {
  d.assign(static_cast<std::size_t>(m), 0.0);
  e.assign(static_cast<std::size_t>(m), 0.0);
  auto zz = [&](Index i, Index j) -> double& { return z[static_cast<std::size_t>(i * m + j)]; };
  for (Index i = m - 1; i >= 1; --i) {
    const Index l = i - 1;
    double h = 0.0, sc = 0.0;
    if (l > 0) {
      for (Index k = 0; k <= l; ++k) sc += std::abs(zz(i, k));
      if (sc == 0.0) {
        e[i] = zz(i, l);
      } else {
        for (Index k = 0; k <= l; ++k) {
          zz(i, k) /= sc;
          h += zz(i, k) * zz(i, k);
        }
        double f = zz(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = sc * g;
        h -= f * g;
        zz(i, l) = f - g;
        f = 0.0;
        for (Index j = 0; j <= l; ++j) {
          zz(j, i) = zz(i, j) / h;
          g = 0.0;
          for (Index k = 0; k <= j; ++k) g += zz(j, k) * zz(i, k);
          for (Index k = j + 1; k <= l; ++k) g += zz(k, j) * zz(i, k);
          e[j] = g / h;
          f += e[j] * zz(i, j);
        }
        const double hh = f / (h + h);
        for (Index j = 0; j <= l; ++j) {
          f = zz(i, j);
          e[j] = g = e[j] - hh * f;
          for (Index k = 0; k <= j; ++k) zz(j, k) -= f * e[k] + g * zz(i, k);
        }
      }
    } else {
      e[i] = zz(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (Index i = 0; i < m; ++i) {
    const Index l = i - 1;
    if (d[i] != 0.0) {
      for (Index j = 0; j <= l; ++j) {
        double g = 0.0;
        for (Index k = 0; k <= l; ++k) g += zz(i, k) * zz(k, j);
        for (Index k = 0; k <= l; ++k) zz(k, j) -= g * zz(k, i);
      }
    }
    d[i] = zz(i, i);
    zz(i, i) = 1.0;
    for (Index j = 0; j <= l; ++j) {
      zz(j, i) = 0.0;
      zz(i, j) = 0.0;
    }
  }
}

}  // namespace detail

struct SymEig {
  std::vector<double> values;  // ascending
  SmallMatrix vectors;         // orthonormal columns
};

struct TridiagEig {
  std::vector<double> values;    // ascending
  std::vector<double> last_row;  // last row of the eigenvector matrix
};

/// Eigenvalues and full eigenvectors of a symmetric tridiagonal matrix.
inline SymEig tridiag_eig(std::span<const double> alpha, std::span<const double> beta) {
  const Index m = static_cast<Index>(alpha.size());
  if (m == 0) throw DimensionError("tridiag_eig: empty matrix");
  if (static_cast<Index>(beta.size()) + 1 != m && m > 1)
    throw DimensionError("tridiag_eig: beta must have length m-1");
  std::vector<double> d(alpha.begin(), alpha.end());
  std::vector<double> e(static_cast<std::size_t>(m), 0.0);
  for (Index i = 0; i + 1 < m; ++i) e[i] = beta[i];
  std::vector<double> z(static_cast<std::size_t>(m * m), 0.0);
  for (Index i = 0; i < m; ++i) z[static_cast<std::size_t>(i * m + i)] = 1.0;
  detail::ql_implicit(d, e, z.data(), m);
  detail::sort_ascending(d, z.data(), m);
  SymEig out;
  out.values = std::move(d);
  out.vectors = SmallMatrix(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < m; ++k) out.vectors.at(i, k) = z[static_cast<std::size_t>(i * m + k)];
  return out;
}

/// Eigenvalues and only the last row of the eigenvector matrix; O(m^2), used
/// for per-iteration Lanczos residual estimates.
inline TridiagEig tridiag_eig_lastrow(std::span<const double> alpha, std::span<const double> beta) {
  const Index m = static_cast<Index>(alpha.size());
  if (m == 0) throw DimensionError("tridiag_eig_lastrow: empty matrix");
  std::vector<double> d(alpha.begin(), alpha.end());
  std::vector<double> e(static_cast<std::size_t>(m), 0.0);
  for (Index i = 0; i + 1 < m; ++i) e[i] = beta[i];
  std::vector<double> z(static_cast<std::size_t>(m), 0.0);
  z[static_cast<std::size_t>(m - 1)] = 1.0;
  detail::ql_implicit(d, e, z.data(), 1);
  detail::sort_ascending(d, z.data(), 1);
  return {std::move(d), std::move(z)};
}

/// Symmetric eigendecomposition via Householder tridiagonalization followed
/// by implicit QL.  Input must be symmetric within 1e-12 relative.
inline SymEig sym_eig(const SmallMatrix& t) {
  const Index m = t.rows();
  if (t.cols() != m) throw DimensionError("sym_eig: matrix not square");
  if (m == 0) throw DimensionError("sym_eig: empty matrix");
  const double scale = t.max_abs();
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < j; ++i)
      if (std::abs(t.at(i, j) - t.at(j, i)) > 1e-12 * std::max(1.0, scale))
        throw Error("sym_eig: matrix is not symmetric");
  std::vector<double> z(static_cast<std::size_t>(m * m));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      z[static_cast<std::size_t>(i * m + j)] = 0.5 * (t.at(i, j) + t.at(j, i));
  std::vector<double> d, e;
  detail::tred2(z, m, d, e);
  // tred2 leaves e[i] coupling (i-1, i); shift to couple (i, i+1).
  for (Index i = 0; i + 1 < m; ++i) e[i] = e[i + 1];
  detail::ql_implicit(d, e, z.data(), m);
  detail::sort_ascending(d, z.data(), m);
  SymEig out;
  out.values = std::move(d);
  out.vectors = SmallMatrix(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < m; ++k) out.vectors.at(i, k) = z[static_cast<std::size_t>(i * m + k)];
  return out;
}

/// Generalized symmetric eigenproblem A c = theta B c with B positive
/// definite, reduced to standard form through B = L L^T.
inline SymEig sym_gen_eig(const SmallMatrix& a, const SmallMatrix& b) {
  const Index m = a.rows();
  if (a.cols() != m || b.rows() != m || b.cols() != m)
    throw DimensionError("sym_gen_eig: dimension mismatch");
  const SmallMatrix l = detail::cholesky_lower(b);  // CholeskyError carries the pivot
  // y = L^{-1} a, then w = L^{-1} y^T, so w = L^{-1} a L^{-T} up to symmetry.
  SmallMatrix y = a;
  std::vector<double> colbuf(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) colbuf[i] = y.at(i, j);
    detail::forward_solve(l, colbuf);
    for (Index i = 0; i < m; ++i) y.at(i, j) = colbuf[i];
  }
  SmallMatrix w = y.transposed();
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) colbuf[i] = w.at(i, j);
    detail::forward_solve(l, colbuf);
    for (Index i = 0; i < m; ++i) w.at(i, j) = colbuf[i];
  }
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < j; ++i) {
      const double v = 0.5 * (w.at(i, j) + w.at(j, i));
      w.at(i, j) = v;
      w.at(j, i) = v;
    }
  SymEig inner = sym_eig(w);
  SmallMatrix c(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) colbuf[i] = inner.vectors.at(i, j);
    detail::back_solve_transposed(l, colbuf);
    for (Index i = 0; i < m; ++i) c.at(i, j) = colbuf[i];
  }
  return {std::move(inner.values), std::move(c)};
}

struct CholeskyQr {
  ColumnBlock q;  // orthonormal columns
  SmallMatrix r;  // upper triangular, x = q r
};

/// Orthonormalization through the Gram matrix; a second pass is run when the
/// first R factor looks ill conditioned (CholeskyQR2).
inline CholeskyQr cholesky_qr(const ColumnBlock& x) {
  const Index b = x.cols();
  if (b < 1) throw DimensionError("cholesky_qr: block has no columns");
  SmallMatrix g = gram(x, x);
  SmallMatrix l1;
  try {
    l1 = detail::cholesky_lower(g);
  } catch (const CholeskyError& e) {
    throw RankDeficiencyError(std::string("cholesky_qr: rank deficient block (") + e.what() + ")",
                              e.pivot);
  }
  auto right_solve = [&](const ColumnBlock& src, const SmallMatrix& l) {
    // q = src * R^{-1} with R = L^T upper triangular.
    ColumnBlock q(src.rows(), b);
    for (Index j = 0; j < b; ++j) {
      std::vector<double> u(src.col(j).begin(), src.col(j).end());
      for (Index k = 0; k < j; ++k) axpy(-l.at(j, k), q.col(k), u);  // R(k,j) = L(j,k)
      scale(u, 1.0 / l.at(j, j));
      std::copy(u.begin(), u.end(), q.col(j).begin());
    }
    return q;
  };
  ColumnBlock q = right_solve(x, l1);
  double dmax = 0.0, dmin = std::numeric_limits<double>::max();
  for (Index i = 0; i < b; ++i) {
    dmax = std::max(dmax, l1.at(i, i));
    dmin = std::min(dmin, l1.at(i, i));
  }
  SmallMatrix r = l1.transposed();
  if (dmax / dmin > 1e7) {
    SmallMatrix g2 = gram(q, q);
    SmallMatrix l2;
    try {
      l2 = detail::cholesky_lower(g2);
    } catch (const CholeskyError& e) {
      throw RankDeficiencyError(std::string("cholesky_qr: rank deficient block (") + e.what() +
                                    ")",
                                e.pivot);
    }
    q = right_solve(q, l2);
    r = matmul(l2.transposed(), r);
  }
  return {std::move(q), std::move(r)};
}

struct BlockOrtho {
  ColumnBlock q;  // orthonormal, orthogonal to the prior basis
  SmallMatrix r;  // Gram-Schmidt coefficients of the input block against q
  int kept;       // input columns that survived without replacement
};

/// Block Gram-Schmidt of w against an orthonormal basis v_prev, projection
/// applied twice.  Numerically dependent columns are replaced by random
/// vectors orthogonalized against everything; their R diagonal stays zero.
inline BlockOrtho block_orthogonalize(const ColumnBlock& v_prev, const ColumnBlock& w, Rng& rng) {
  const Index n = w.rows();
  const Index b = w.cols();
  if (b < 1) throw DimensionError("block_orthogonalize: block has no columns");
  if (!v_prev.empty() && v_prev.rows() != n)
    throw DimensionError("block_orthogonalize: row mismatch");
  BlockOrtho out{ColumnBlock(n, b), SmallMatrix(b, b), static_cast<int>(b)};

  auto project = [&](std::vector<double>& u, Index jcols, double* r_col) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index p = 0; p < v_prev.cols(); ++p) {
        const double c = dot(v_prev.col(p), u);
        axpy(-c, v_prev.col(p), u);
      }
      for (Index i = 0; i < jcols; ++i) {
        const double c = dot(out.q.col(i), u);
        if (r_col != nullptr) r_col[i] += c;
        axpy(-c, out.q.col(i), u);
      }
    }
  };

  std::vector<double> rcol(static_cast<std::size_t>(b));
  for (Index j = 0; j < b; ++j) {
    std::vector<double> u(w.col(j).begin(), w.col(j).end());
    const double norm0 = norm2(u);
    std::fill(rcol.begin(), rcol.end(), 0.0);
    project(u, j, rcol.data());
    const double nrm = norm2(u);
    if (nrm > 1e-12 * std::max(norm0, 1e-300)) {
      for (Index i = 0; i < j; ++i) out.r.at(i, j) = rcol[i];
      out.r.at(j, j) = nrm;
      scale(u, 1.0 / nrm);
      std::copy(u.begin(), u.end(), out.q.col(j).begin());
    } else {
      for (Index i = 0; i < j; ++i) out.r.at(i, j) = rcol[i];
      out.r.at(j, j) = 0.0;
      --out.kept;
      bool replaced = false;
      for (int attempt = 0; attempt < 100 && !replaced; ++attempt) {
        for (double& v : u) v = rng.normal();
        const double before = norm2(u);
        project(u, j, nullptr);
        const double after = norm2(u);
        if (after > 1e-8 * before) {
          scale(u, 1.0 / after);
          std::copy(u.begin(), u.end(), out.q.col(j).begin());
          replaced = true;
        }
      }
      if (!replaced)
        throw RankDeficiencyError("block_orthogonalize: no orthogonal complement left",
                                  static_cast<int>(v_prev.cols() + j));
    }
  }
  return out;
}

/// Coefficients minimizing || sum_i alpha_i r_i || subject to sum alpha_i = 1.
/// A ridge of 1e-12 * trace on the residual Gram matrix makes collinear
/// histories well posed and picks the symmetric solution for ties.
inline std::vector<double> diis_ls(const std::vector<std::vector<double>>& residual_history) {
  const Index s = static_cast<Index>(residual_history.size());
  if (s < 1) throw DimensionError("diis_ls: empty residual history");
  if (s == 1) return {1.0};
  SmallMatrix g(s, s);
  for (Index i = 0; i < s; ++i)
    for (Index j = i; j < s; ++j) {
      const double v = dot(residual_history[static_cast<std::size_t>(i)],
                           residual_history[static_cast<std::size_t>(j)]);
      g.at(i, j) = v;
      g.at(j, i) = v;
    }
  const double tr = g.trace();
  std::vector<double> y(static_cast<std::size_t>(s), 1.0);
  if (tr <= 0.0) {
    // All residuals vanish; any convex combination works.
    for (double& v : y) v = 1.0 / static_cast<double>(s);
    return y;
  }
  const double delta = 1e-12 * tr;
  for (Index i = 0; i < s; ++i) g.at(i, i) += delta;
  const SmallMatrix l = detail::cholesky_lower(g);
  detail::forward_solve(l, y);
  detail::back_solve_transposed(l, y);
  double sum = 0.0;
  for (double v : y) sum += v;
  for (double& v : y) v /= sum;
  return y;
}

/// sqrt of the spectral condition number of S^T S, smallest eigenvalue
/// floored at 1e-300.
inline double estimate_condition(const ColumnBlock& s) {
  if (s.cols() < 1) throw DimensionError("estimate_condition: empty block");
  const SymEig eig = sym_eig(gram(s, s));
  const double lmax = eig.values.back();
  if (lmax <= 0.0) return 1.0;
  const double lmin = std::max(eig.values.front(), 1e-300);
  return std::sqrt(lmax / lmin);
}

}  // namespace ritz
