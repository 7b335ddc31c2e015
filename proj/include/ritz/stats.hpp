#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ritz/column_block.hpp"

namespace ritz {

struct PairSample {
  double theta;
  double rel_residual;
};

/// Counters, timings and convergence history for one solver run.
/// spmv_actual counts matrix applications in single-vector units: an SpMM on
/// b columns adds b.
struct SolveStats {
  long long spmv_actual = 0;
  long long spmm_calls = 0;
  int iterations = 0;
  std::vector<std::pair<std::string, int>> phase_marks;
  std::map<std::string, double> timings;  // spmm, ortho, rayleigh_ritz, other
  double total_seconds = 0.0;
  std::vector<std::vector<PairSample>> history;  // one entry per iteration
  std::vector<double> tau_history;
  std::vector<double> condition_history;               // LOBPCG subspace condition
  std::vector<std::pair<int, double>> drift_checks;    // LOBPCG H*X cache revalidation
  std::vector<std::pair<int, double>> drift_checks_p;  // LOBPCG H*P cache revalidation
  std::vector<int> locked_history;                     // ChebFSI locked count per outer
  std::vector<std::pair<std::string, long long>> phase_spmv;  // hybrid per-phase counts
};

/// Accumulates elapsed seconds into a bucket while in scope.
class ScopedTimer {
 public:
  explicit ScopedTimer(double& acc)
      : acc_(&acc), t0_(std::chrono::steady_clock::now()) {}
  ~ScopedTimer() {
    const auto t1 = std::chrono::steady_clock::now();
    *acc_ += std::chrono::duration<double>(t1 - t0_).count();
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  double* acc_;
  std::chrono::steady_clock::time_point t0_;
};

/// Wraps an operator so every application is counted and timed.  Solvers
/// funnel all H applications through one of these; nothing else touches H.
template <class Op>
class MeteredOp {
 public:
  MeteredOp(const Op& op, SolveStats& stats) : op_(&op), stats_(&stats) {}

  Index dim() const { return op_->dim(); }
  double frob_norm() const { return op_->frob_norm(); }
  std::vector<double> diagonal() const { return op_->diagonal(); }

  void apply(std::span<const double> x, std::span<double> y) const {
    ScopedTimer t(stats_->timings["spmm"]);
    stats_->spmv_actual += 1;
    op_->apply(x, y);
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(op_->dim()));
    apply(x, y);
    return y;
  }

  void apply_block(const ColumnBlock& x, ColumnBlock& y) const {
    ScopedTimer t(stats_->timings["spmm"]);
    stats_->spmv_actual += x.cols();
    stats_->spmm_calls += 1;
    op_->apply_block(x, y);
  }

  ColumnBlock apply_block(const ColumnBlock& x) const {
    ColumnBlock y(op_->dim(), x.cols());
    apply_block(x, y);
    return y;
  }

 private:
  const Op* op_;
  SolveStats* stats_;
};

namespace detail {

/// Folds the unattributed remainder of the wall time into "other".
class RunTimer {
 public:
  explicit RunTimer(SolveStats& stats)
      : stats_(&stats), t0_(std::chrono::steady_clock::now()) {}
  ~RunTimer() {
    const auto t1 = std::chrono::steady_clock::now();
    stats_->total_seconds = std::chrono::duration<double>(t1 - t0_).count();
    double attributed = 0.0;
    for (const char* key : {"spmm", "ortho", "rayleigh_ritz"}) attributed += stats_->timings[key];
    stats_->timings["other"] = std::max(0.0, stats_->total_seconds - attributed);
  }

 private:
  SolveStats* stats_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

}  // namespace ritz
