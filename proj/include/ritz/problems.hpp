#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/errors.hpp"
#include "ritz/rng.hpp"
#include "ritz/sparse.hpp"

namespace ritz {

namespace detail {

/// Dense symmetric workspace for spectrum-preserving constructions.
class DenseSym {
 public:
  explicit DenseSym(std::vector<double> diag)
      : n_(static_cast<Index>(diag.size())), a_(static_cast<std::size_t>(n_ * n_), 0.0) {
    for (Index i = 0; i < n_; ++i) at(i, i) = diag[static_cast<std::size_t>(i)];
  }

  Index dim() const { return n_; }
  double& at(Index i, Index j) { return a_[static_cast<std::size_t>(i * n_ + j)]; }
  double at(Index i, Index j) const { return a_[static_cast<std::size_t>(i * n_ + j)]; }

  /// A <- G A G^T for the Givens rotation G acting on coordinates (i, j).
  void rotate(Index i, Index j, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (Index k = 0; k < n_; ++k) {  // rows
      const double ri = at(i, k), rj = at(j, k);
      at(i, k) = c * ri - s * rj;
      at(j, k) = s * ri + c * rj;
    }
    for (Index k = 0; k < n_; ++k) {  // columns
      const double ci = at(k, i), cj = at(k, j);
      at(k, i) = c * ci - s * cj;
      at(k, j) = s * ci + c * cj;
    }
  }

  void symmetrize() {
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < i; ++j) {
        const double v = 0.5 * (at(i, j) + at(j, i));
        at(i, j) = v;
        at(j, i) = v;
      }
  }

  SparseSymMatrix to_sparse() const {
    std::vector<std::tuple<Index, Index, double>> entries;
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < n_; ++j)
        if (at(i, j) != 0.0) entries.emplace_back(i, j, at(i, j));
    return SparseSymMatrix::from_coo(n_, std::move(entries), StorageMode::full);
  }

 private:
  Index n_;
  std::vector<double> a_;
};

}  // namespace detail

/// Tridiagonal 1D Laplacian: 2 on the diagonal, -1 off; eigenvalues are
/// 2 - 2 cos(j pi / (n+1)), j = 1..n.
inline SparseSymMatrix gen_laplacian_1d(Index n) {
  if (n < 2) throw DimensionError("gen_laplacian_1d: need n >= 2");
  std::vector<std::tuple<Index, Index, double>> entries;
  for (Index i = 0; i < n; ++i) {
    if (i > 0) entries.emplace_back(i, i - 1, -1.0);
    entries.emplace_back(i, i, 2.0);
    if (i + 1 < n) entries.emplace_back(i, i + 1, -1.0);
  }
  return SparseSymMatrix::from_coo(n, std::move(entries), StorageMode::full);
}

inline std::vector<double> laplacian_1d_eigenvalues(Index n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  const double pi = 3.14159265358979323846;
  for (Index j = 1; j <= n; ++j)
    v[static_cast<std::size_t>(j - 1)] =
        2.0 - 2.0 * std::cos(static_cast<double>(j) * pi / static_cast<double>(n + 1));
  return v;
}

/// diag(spectrum) conjugated by `rotations` seeded random Givens rotations;
/// the spectrum is preserved exactly (orthogonal similarity) while fill-in
/// grows with the rotation count.
inline SparseSymMatrix gen_prescribed_spectrum(const std::vector<double>& spectrum,
                                               Index rotations, std::uint64_t seed) {
  const Index n = static_cast<Index>(spectrum.size());
  if (n < 2) throw DimensionError("gen_prescribed_spectrum: need at least 2 values");
  for (double v : spectrum)
    if (!std::isfinite(v)) throw DimensionError("gen_prescribed_spectrum: non-finite value");
  detail::DenseSym a(spectrum);
  Rng rng(seed ^ 0xa4093822299f31d0ull);
  const double two_pi = 6.283185307179586476925286766559;
  for (Index r = 0; r < rotations; ++r) {
    const Index i = rng.index(n);
    Index j = rng.index(n - 1);
    if (j >= i) ++j;
    a.rotate(std::min(i, j), std::max(i, j), rng.uniform(0.0, two_pi));
  }
  a.symmetrize();
  return a.to_sparse();
}

/// Spectrum with near-degenerate pairs among otherwise well-separated low
/// eigenvalues: values 1..7 followed by a cluster opening the given relative
/// gaps, then an evenly spread bulk.
inline std::vector<double> near_degenerate_spectrum(Index n, const std::vector<double>& gap_fracs) {
  const Index cluster = static_cast<Index>(gap_fracs.size());
  if (n < 8 + cluster + 1) throw DimensionError("near_degenerate_spectrum: n too small");
  for (double g : gap_fracs)
    if (g < 0.0) throw DimensionError("near_degenerate_spectrum: gaps must be non-negative");
  std::vector<double> s;
  for (Index j = 1; j <= 7; ++j) s.push_back(static_cast<double>(j));
  for (double g : gap_fracs) s.push_back(s.back() * (1.0 + g));
  const Index bulk = n - static_cast<Index>(s.size());
  for (Index j = 0; j < bulk; ++j)
    s.push_back(12.0 + 48.0 * static_cast<double>(j) / static_cast<double>(std::max<Index>(bulk - 1, 1)));
  return s;
}

inline SparseSymMatrix gen_near_degenerate(Index n, const std::vector<double>& gap_fracs,
                                           std::uint64_t seed, Index rotations = -1) {
  if (rotations < 0) rotations = 4 * n;
  return gen_prescribed_spectrum(near_degenerate_spectrum(n, gap_fracs), rotations, seed);
}

struct NestedPair {
  SparseSymMatrix a_small;  // leading m x m principal submatrix of a
  SparseSymMatrix a;
};

/// Nested problem pair: the big matrix mixes the first m spectrum values
/// inside the leading block and the rest in the tail block, with a few weak
/// cross rotations.  The leading principal submatrix then approximates the
/// low end of the spectrum, mirroring a truncated-space calculation, and its
/// padded eigenvectors are useful starting guesses.
inline NestedPair gen_nested_pair(Index n, Index m, const std::vector<double>& spectrum,
                                  std::uint64_t seed, Index rotations = -1) {
  if (static_cast<Index>(spectrum.size()) != n)
    throw DimensionError("gen_nested_pair: spectrum length must equal n");
  if (m < 2 || m > n) throw DimensionError("gen_nested_pair: need 2 <= m <= n");
  if (rotations < 0) rotations = 4 * n;
  std::vector<double> sorted = spectrum;
  std::sort(sorted.begin(), sorted.end());
  detail::DenseSym a(sorted);
  Rng rng(seed ^ 0x082efa98ec4e6c89ull);
  const double two_pi = 6.283185307179586476925286766559;

  const Index cross = (m == n) ? 0 : std::max<Index>(2, rotations / 100);
  const Index in_block = rotations - cross;
  const Index r1 = (m == n) ? in_block : in_block * m / n;
  const Index r2 = in_block - r1;
  auto rotate_within = [&](Index lo, Index hi) {  // [lo, hi)
    const Index span = hi - lo;
    const Index i = lo + rng.index(span);
    Index j = lo + rng.index(span - 1);
    if (j >= i) ++j;
    a.rotate(std::min(i, j), std::max(i, j), rng.uniform(0.0, two_pi));
  };
  for (Index r = 0; r < r1; ++r) rotate_within(0, m);
  for (Index r = 0; r < r2; ++r) rotate_within(m, n);
  for (Index r = 0; r < cross; ++r) {
    const Index i = rng.index(m);
    const Index j = m + rng.index(n - m);
    a.rotate(i, j, rng.uniform(-0.05, 0.05));  // weak coupling
  }
  a.symmetrize();

  SparseSymMatrix big = a.to_sparse();
  std::vector<std::tuple<Index, Index, double>> small_entries;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (a.at(i, j) != 0.0) small_entries.emplace_back(i, j, a.at(i, j));
  SparseSymMatrix small = SparseSymMatrix::from_coo(m, std::move(small_entries), StorageMode::full);
  return {std::move(small), std::move(big)};
}

/// Zero-pad an m x b guess block to n rows and re-normalize the columns.
inline ColumnBlock pad_initial_guess(const ColumnBlock& x_small, Index n) {
  const Index m = x_small.rows();
  if (m > n) throw DimensionError("pad_initial_guess: block taller than target dimension");
  ColumnBlock x(n, x_small.cols());
  for (Index j = 0; j < x_small.cols(); ++j) {
    for (Index i = 0; i < m; ++i) x(i, j) = x_small(i, j);
    const double nrm = norm2(x.col(j));
    if (!(nrm > 0.0))
      throw DimensionError("pad_initial_guess: column " + std::to_string(j) + " is zero");
    scale(x.col(j), 1.0 / nrm);
  }
  return x;
}

enum class ProblemKind { laplacian1d, prescribed, nested, near_degenerate };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::laplacian1d;
  Index n = 100;
  Index m = 0;                   // nested only
  std::vector<double> spectrum;  // prescribed/nested; empty means 1..n
  Index rotations = -1;          // default 4n
  std::uint64_t seed = 0;
  std::vector<double> gap_fracs = {0.006, 0.0003};
};

struct GeneratedProblem {
  SparseSymMatrix a;
  std::optional<SparseSymMatrix> a_small;
};

inline GeneratedProblem generate(const ProblemSpec& spec) {
  std::vector<double> spectrum = spec.spectrum;
  if (spectrum.empty()) {
    spectrum.resize(static_cast<std::size_t>(spec.n));
    for (Index j = 0; j < spec.n; ++j)
      spectrum[static_cast<std::size_t>(j)] = static_cast<double>(j + 1);
  }
  const Index rotations = spec.rotations < 0 ? 4 * spec.n : spec.rotations;
  switch (spec.kind) {
    case ProblemKind::laplacian1d:
      return {gen_laplacian_1d(spec.n), {}};
    case ProblemKind::prescribed:
      return {gen_prescribed_spectrum(spectrum, rotations, spec.seed), {}};
    case ProblemKind::near_degenerate:
      return {gen_near_degenerate(spec.n, spec.gap_fracs, spec.seed, rotations), {}};
    case ProblemKind::nested: {
      NestedPair pair = gen_nested_pair(spec.n, spec.m, spectrum, spec.seed, rotations);
      return {std::move(pair.a), std::move(pair.a_small)};
    }
  }
  throw DimensionError("generate: unknown problem kind");
}

}  // namespace ritz
