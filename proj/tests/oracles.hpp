// Test-side oracles, written independently of the library's numerical paths:
// a cyclic Jacobi eigensolver, dense mat-vec, characteristic-polynomial roots
// for 2x2 / 3x3 matrices, and a counting operator wrapper.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/sparse.hpp"

namespace oracle {

using ritz::ColumnBlock;
using ritz::Index;

/// Row-major dense copy of a sparse symmetric matrix (both triangles).
inline std::vector<double> dense_from_sparse(const ritz::SparseSymMatrix& a) {
  const Index n = a.dim();
  std::vector<double> d(static_cast<std::size_t>(n * n), 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k) {
      const Index j = a.col_indices()[k];
      const double v = a.values()[k];
      d[static_cast<std::size_t>(i * n + j)] = v;
      if (a.storage_mode() == ritz::StorageMode::lower_half)
        d[static_cast<std::size_t>(j * n + i)] = v;
    }
  return d;
}

inline std::vector<double> dense_matvec(const std::vector<double>& a, Index n,
                                        std::span<const double> x) {
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < n; ++j) s += a[static_cast<std::size_t>(i * n + j)] * x[j];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

struct DenseEig {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // row-major n x n, column k is eigenvector k
  Index n = 0;

  std::vector<double> vec(Index k) const {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] =
        vectors[static_cast<std::size_t>(i * n + k)];
    return v;
  }
};

/// Cyclic Jacobi eigensolver on a row-major dense symmetric matrix.
inline DenseEig jacobi_eig(std::vector<double> a, Index n, int max_sweeps = 40) {
  std::vector<double> v(static_cast<std::size_t>(n * n), 0.0);
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i * n + i)] = 1.0;
  auto A = [&](Index i, Index j) -> double& { return a[static_cast<std::size_t>(i * n + j)]; };
  auto V = [&](Index i, Index j) -> double& { return v[static_cast<std::size_t>(i * n + j)]; };

  double scale = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) scale = std::max(scale, std::abs(A(i, j)));
  if (scale == 0.0) scale = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(A(p, q)));
    if (off <= 1e-15 * scale) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) <= 1e-18 * scale) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }

  DenseEig out;
  out.n = n;
  out.values.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.values[static_cast<std::size_t>(i)] = A(i, i);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index x, Index y) { return out.values[static_cast<std::size_t>(x)] <
                                           out.values[static_cast<std::size_t>(y)]; });
  std::sort(out.values.begin(), out.values.end());
  out.vectors.resize(static_cast<std::size_t>(n * n));
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      out.vectors[static_cast<std::size_t>(i * n + k)] = V(i, order[static_cast<std::size_t>(k)]);
  return out;
}

inline DenseEig jacobi_eig(const ritz::SparseSymMatrix& a) {
  return jacobi_eig(dense_from_sparse(a), a.dim());
}

/// Roots of det(A - lambda I) for a symmetric 2x2.
inline std::vector<double> char_poly_roots_2x2(double a, double b, double d) {
  const double tr = a + d;
  const double det = a * d - b * b;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  return {tr / 2.0 - disc, tr / 2.0 + disc};
}

/// Roots for a symmetric 3x3 via the trigonometric closed form.
inline std::vector<double> char_poly_roots_3x3(double a11, double a12, double a13, double a22,
                                               double a23, double a33) {
  const double p1 = a12 * a12 + a13 * a13 + a23 * a23;
  const double q = (a11 + a22 + a33) / 3.0;
  if (p1 == 0.0) {
    std::vector<double> r = {a11, a22, a33};
    std::sort(r.begin(), r.end());
    return r;
  }
  const double p2 = (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + (a33 - q) * (a33 - q) +
                    2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  // B = (A - qI)/p, r = det(B)/2 clamped into [-1, 1].
  const double b11 = (a11 - q) / p, b22 = (a22 - q) / p, b33 = (a33 - q) / p;
  const double b12 = a12 / p, b13 = a13 / p, b23 = a23 / p;
  double r = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) +
             b13 * (b12 * b23 - b22 * b13);
  r /= 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double pi = 3.14159265358979323846;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  std::vector<double> roots = {e1, e2, e3};
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Forwarding wrapper that counts every application of the operator.
template <class Op>
struct CountingOp {
  explicit CountingOp(const Op& op) : op(&op) {}
  const Op* op;
  mutable long long single_applies = 0;
  mutable long long block_columns = 0;
  mutable long long block_calls = 0;
  mutable std::vector<ritz::Index> block_widths;

  Index dim() const { return op->dim(); }
  double frob_norm() const { return op->frob_norm(); }
  std::vector<double> diagonal() const { return op->diagonal(); }

  void apply(std::span<const double> x, std::span<double> y) const {
    ++single_applies;
    op->apply(x, y);
  }
  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(op->dim()));
    apply(x, y);
    return y;
  }
  void apply_block(const ColumnBlock& x, ColumnBlock& y) const {
    ++block_calls;
    block_columns += x.cols();
    block_widths.push_back(x.cols());
    op->apply_block(x, y);
  }
  ColumnBlock apply_block(const ColumnBlock& x) const {
    ColumnBlock y(op->dim(), x.cols());
    apply_block(x, y);
    return y;
  }

  long long total() const { return single_applies + block_columns; }
};

}  // namespace oracle
