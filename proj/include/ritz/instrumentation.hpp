#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ritz/column_block.hpp"
#include "ritz/errors.hpp"
#include "ritz/rng.hpp"
#include "ritz/sparse.hpp"

namespace ritz {

/// Throughput of the two kernels and their ratio; the ratio converts actual
/// SpMV counts into effective ones.
struct KernelRatio {
  double spmv_gflops = 0.0;
  double spmm_gflops = 0.0;
  double ratio = 0.0;
  Index nb = 0;
};

/// Actual SpMV-equivalents divided by the measured SpMM/SpMV throughput ratio.
inline double effective_spmv(double actual, double ratio) {
  if (!(ratio > 0.0)) throw DimensionError("effective_spmv: ratio must be positive");
  return actual / ratio;
}

/// Flops of one SpMV: 2 per logical nonzero (both triangles count, regardless
/// of the storage mode, so half- and full-storage kernels are comparable).
inline double spmv_flops(const SparseSymMatrix& a) {
  return 2.0 * static_cast<double>(a.logical_nnz());
}

/// Median-timed SpMV vs SpMM(nb) throughput on random inputs.  The block
/// result is checked against column-wise SpMV before anything is timed.
inline KernelRatio measure_kernel_ratio(const SparseSymMatrix& a, Index nb, int repetitions,
                                        std::uint64_t seed = 0) {
  if (repetitions < 3) throw DimensionError("measure_kernel_ratio: need at least 3 repetitions");
  if (nb < 1) throw DimensionError("measure_kernel_ratio: nb must be >= 1");
  Rng rng(seed ^ 0x13198a2e03707344ull);
  const Index n = a.dim();
  ColumnBlock x = ColumnBlock::random(n, nb, rng);
  ColumnBlock y(n, nb);

  a.apply_block(x, y);
  std::vector<double> yj(static_cast<std::size_t>(n));
  for (Index j = 0; j < nb; ++j) {
    a.apply(x.col(j), yj);
    for (Index i = 0; i < n; ++i)
      if (yj[static_cast<std::size_t>(i)] != y(i, j))
        throw Error("measure_kernel_ratio: SpMM disagrees with column-wise SpMV");
  }

  auto median_seconds = [&](auto&& body) {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      body();
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
  };

  const double t_spmv = median_seconds([&] { a.apply(x.col(0), yj); });
  const double t_spmm = median_seconds([&] { a.apply_block(x, y); });
  if (!(t_spmv > 0.0) || !(t_spmm > 0.0))
    throw Error("measure_kernel_ratio: timing resolution too coarse; increase repetitions "
                "or problem size");

  KernelRatio out;
  out.nb = nb;
  out.spmv_gflops = spmv_flops(a) / t_spmv / 1e9;
  out.spmm_gflops = spmv_flops(a) * static_cast<double>(nb) / t_spmm / 1e9;
  out.ratio = out.spmm_gflops / out.spmv_gflops;
  return out;
}

enum class Method { lanczos, block_lanczos, lobpcg, chebfsi, rmm_diis };

struct MemoryParams {
  Index n = 0;
  std::optional<Index> n_b;
  std::optional<Index> n_ev;
  std::optional<Index> k;  // iteration count for the Lanczos variants
  std::optional<Index> s_max;
};

/// Memory-footprint model (floating-point value count) with all big-O
/// constants fixed at one.
inline double memory_estimate(Method method, const MemoryParams& p) {
  auto need = [&](const std::optional<Index>& v, const char* name) {
    if (!v || *v < 1)
      throw DimensionError(std::string("memory_estimate: missing or invalid parameter ") + name);
    return static_cast<double>(*v);
  };
  if (p.n < 1) throw DimensionError("memory_estimate: missing or invalid parameter n");
  const double n = static_cast<double>(p.n);
  switch (method) {
    case Method::lanczos: {
      const double k = need(p.k, "k"), nev = need(p.n_ev, "n_ev");
      return n * (k + nev) + k * k;
    }
    case Method::block_lanczos: {
      const double k = need(p.k, "k"), nev = need(p.n_ev, "n_ev"), nb = need(p.n_b, "n_b");
      return n * nb * (k + nev) + (nb * k) * (nb * k);
    }
    case Method::lobpcg: {
      const double nb = need(p.n_b, "n_b");
      return 7.0 * n * nb + 9.0 * nb * nb;
    }
    case Method::chebfsi: {
      const double nb = need(p.n_b, "n_b");
      return 4.0 * n * nb + nb * nb;
    }
    case Method::rmm_diis: {
      const double nev = need(p.n_ev, "n_ev"), smax = need(p.s_max, "s_max");
      return n * (3.0 * nev + smax);
    }
  }
  throw DimensionError("memory_estimate: unknown method");
}

}  // namespace ritz
