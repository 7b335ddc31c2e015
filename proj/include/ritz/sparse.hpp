#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/errors.hpp"

namespace ritz {

enum class StorageMode { full, lower_half };

/// Immutable CSR sparse symmetric matrix.
///
/// In `full` mode every nonzero (i,j) appears together with its mirror (j,i).
/// In `lower_half` mode only entries with j <= i are stored and the kernels
/// scatter each off-diagonal entry into both rows.  SpMM walks rows outermost
/// and block columns innermost with the same per-row accumulation order as
/// SpMV, so SpMM columns are bit-identical to the corresponding SpMV results.
class SparseSymMatrix {
 public:
  static SparseSymMatrix from_csr(Index n, std::vector<Index> row_offsets,
                                  std::vector<Index> col_indices, std::vector<double> values,
                                  StorageMode mode) {
    SparseSymMatrix a;
    a.n_ = n;
    a.row_offsets_ = std::move(row_offsets);
    a.col_indices_ = std::move(col_indices);
    a.values_ = std::move(values);
    a.mode_ = mode;
    a.validate();
    a.finish();
    return a;
  }

  /// Build from (i, j, v) triplets; duplicates are rejected.
  static SparseSymMatrix from_coo(Index n, std::vector<std::tuple<Index, Index, double>> entries,
                                  StorageMode mode) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      auto [i, j, v] = entries[k];
      if (i < 0 || i >= n || j < 0 || j >= n)
        throw DimensionError("from_coo: entry index out of range");
      if (k > 0 && std::get<0>(entries[k - 1]) == i && std::get<1>(entries[k - 1]) == j)
        throw Error("from_coo: duplicate entry at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      ++offsets[static_cast<std::size_t>(i) + 1];
      cols.push_back(j);
      vals.push_back(v);
    }
    for (Index i = 0; i < n; ++i) offsets[static_cast<std::size_t>(i) + 1] += offsets[i];
    return from_csr(n, std::move(offsets), std::move(cols), std::move(vals), mode);
  }

  Index dim() const { return n_; }
  Index nnz_stored() const { return static_cast<Index>(values_.size()); }
  StorageMode storage_mode() const { return mode_; }
  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  /// Number of nonzeros of the logical (both triangles) matrix.
  Index logical_nnz() const { return logical_nnz_; }
  double frob_norm() const { return frob_norm_; }

  std::vector<double> diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
    for (Index i = 0; i < n_; ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        if (col_indices_[k] == i) d[static_cast<std::size_t>(i)] = values_[k];
    return d;
  }

  /// y = A*x
  void apply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<Index>(x.size()) != n_ || static_cast<Index>(y.size()) != n_)
      throw DimensionError("spmv: vector length does not match matrix dimension");
    std::fill(y.begin(), y.end(), 0.0);
    if (mode_ == StorageMode::full) {
      for (Index i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
          acc += values_[k] * x[col_indices_[k]];
        y[i] = acc;
      }
    } else {
      for (Index i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
          const Index j = col_indices_[k];
          const double v = values_[k];
          acc += v * x[j];
          if (j != i) y[j] += v * x[i];
        }
        y[i] += acc;
      }
    }
  }

  /// Y = A*X, column j bit-identical to apply(X.col(j)).
  void apply_block(const ColumnBlock& x, ColumnBlock& y) const {
    if (x.rows() != n_) throw DimensionError("spmm: block rows do not match matrix dimension");
    if (y.rows() != n_ || y.cols() != x.cols()) y = ColumnBlock(n_, x.cols());
    const Index b = x.cols();
    for (Index j = 0; j < b; ++j) std::fill(y.col(j).begin(), y.col(j).end(), 0.0);
    std::vector<double> acc(static_cast<std::size_t>(b));
    if (mode_ == StorageMode::full) {
      for (Index i = 0; i < n_; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
          const Index col = col_indices_[k];
          const double v = values_[k];
          for (Index j = 0; j < b; ++j) acc[j] += v * x(col, j);
        }
        for (Index j = 0; j < b; ++j) y(i, j) = acc[j];
      }
    } else {
      for (Index i = 0; i < n_; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
          const Index col = col_indices_[k];
          const double v = values_[k];
          for (Index j = 0; j < b; ++j) acc[j] += v * x(col, j);
          if (col != i)
            for (Index j = 0; j < b; ++j) y(col, j) += v * x(i, j);
        }
        for (Index j = 0; j < b; ++j) y(i, j) += acc[j];
      }
    }
  }

  ColumnBlock apply_block(const ColumnBlock& x) const {
    ColumnBlock y(n_, x.cols());
    apply_block(x, y);
    return y;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(n_));
    apply(x, y);
    return y;
  }

 private:
  SparseSymMatrix() = default;

  double stored(Index i, Index j) const {
    const Index lo = row_offsets_[i], hi = row_offsets_[i + 1];
    auto it = std::lower_bound(col_indices_.begin() + lo, col_indices_.begin() + hi, j);
    if (it == col_indices_.begin() + hi || *it != j) return std::nan("");
    return values_[it - col_indices_.begin()];
  }

  void validate() const {
    const auto nnz = static_cast<Index>(values_.size());
    if (static_cast<Index>(row_offsets_.size()) != n_ + 1)
      throw DimensionError("SparseSymMatrix: row_offsets must have length n+1");
    if (row_offsets_.front() != 0 || row_offsets_.back() != nnz)
      throw Error("SparseSymMatrix: row_offsets must start at 0 and end at nnz");
    if (static_cast<Index>(col_indices_.size()) != nnz)
      throw DimensionError("SparseSymMatrix: col_indices/values length mismatch");
    for (Index i = 0; i < n_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1])
        throw Error("SparseSymMatrix: row_offsets not non-decreasing");
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const Index j = col_indices_[k];
        if (j < 0 || j >= n_) throw Error("SparseSymMatrix: column index out of range");
        if (k > row_offsets_[i] && col_indices_[k - 1] >= j)
          throw Error("SparseSymMatrix: column indices not strictly ascending in row " +
                      std::to_string(i));
        if (mode_ == StorageMode::lower_half && j > i)
          throw Error("SparseSymMatrix: upper-triangle entry in lower-half storage");
      }
    }
    if (mode_ == StorageMode::full) {
      for (Index i = 0; i < n_; ++i) {
        for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
          const Index j = col_indices_[k];
          const double v = values_[k];
          const double w = stored(j, i);
          if (std::isnan(w))
            throw Error("SparseSymMatrix: missing mirror entry for (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
          if (std::abs(v - w) > 1e-12 * std::max(1.0, std::abs(v)))
            throw Error("SparseSymMatrix: asymmetric values at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
        }
      }
    }
  }

  void finish() {
    double fsq = 0.0;
    Index logical = 0;
    for (Index i = 0; i < n_; ++i) {
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const Index j = col_indices_[k];
        const double v2 = values_[k] * values_[k];
        if (mode_ == StorageMode::lower_half && j != i) {
          fsq += 2.0 * v2;
          logical += 2;
        } else {
          fsq += v2;
          logical += 1;
        }
      }
    }
    frob_norm_ = std::sqrt(fsq);
    logical_nnz_ = logical;
  }

  Index n_ = 0;
  std::vector<Index> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
  StorageMode mode_ = StorageMode::full;
  double frob_norm_ = 0.0;
  Index logical_nnz_ = 0;
};

/// Free-function forms matching the operator vocabulary used by the solvers.
inline std::vector<double> spmv(const SparseSymMatrix& a, std::span<const double> x) {
  return a.apply(x);
}

inline ColumnBlock spmm(const SparseSymMatrix& a, const ColumnBlock& x) {
  return a.apply_block(x);
}

}  // namespace ritz
