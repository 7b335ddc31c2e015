#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ritz/errors.hpp"
#include "ritz/rng.hpp"

namespace ritz {

using Index = std::int64_t;

/// Dense n x b block of column vectors, column-major storage.
/// Holds Lanczos bases, Ritz vector blocks, residual blocks and search
/// directions; b may be zero for an empty block (e.g. the initial LOBPCG P).
class ColumnBlock {
 public:
  ColumnBlock() = default;
  ColumnBlock(Index n, Index b) : n_(n), b_(b), data_(static_cast<std::size_t>(n * b), 0.0) {
    if (n < 0 || b < 0) throw DimensionError("ColumnBlock: negative dimensions");
  }

  Index rows() const { return n_; }
  Index cols() const { return b_; }
  bool empty() const { return b_ == 0; }

  double& operator()(Index i, Index j) { return data_[static_cast<std::size_t>(j * n_ + i)]; }
  double operator()(Index i, Index j) const { return data_[static_cast<std::size_t>(j * n_ + i)]; }

  std::span<double> col(Index j) { return {data_.data() + j * n_, static_cast<std::size_t>(n_)}; }
  std::span<const double> col(Index j) const {
    return {data_.data() + j * n_, static_cast<std::size_t>(n_)};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void append_cols(const ColumnBlock& other) {
    if (b_ == 0 && n_ == 0) {
      *this = other;
      return;
    }
    if (other.rows() != n_) throw DimensionError("append_cols: row mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    b_ += other.cols();
  }

  ColumnBlock sub_cols(Index j0, Index count) const {
    ColumnBlock out(n_, count);
    for (Index j = 0; j < count; ++j)
      for (Index i = 0; i < n_; ++i) out(i, j) = (*this)(i, j0 + j);
    return out;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static ColumnBlock random(Index n, Index b, Rng& rng) {
    ColumnBlock x(n, b);
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();
    return x;
  }

 private:
  Index n_ = 0;
  Index b_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline void scale(std::span<double> x, double a) {
  for (double& v : x) v *= a;
}

/// y += a*x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double frob_norm(const ColumnBlock& x) {
  double s = 0.0;
  for (Index j = 0; j < x.cols(); ++j) s += dot(x.col(j), x.col(j));
  return std::sqrt(s);
}

}  // namespace ritz
