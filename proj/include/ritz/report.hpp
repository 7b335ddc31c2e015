#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ritz/column_block.hpp"

namespace ritz {

enum class SolveStatus { converged, maxiter, unstable, stopped };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::maxiter: return "maxiter";
    case SolveStatus::unstable: return "unstable";
    case SolveStatus::stopped: return "stopped";
  }
  return "unknown";
}

/// Approximate eigenpairs in ascending eigenvalue order.
struct EigenReport {
  std::vector<double> eigenvalues;
  ColumnBlock eigenvectors;           // n x n_ev
  std::vector<double> rel_residuals;  // per pair, the solver's stopping metric
  std::vector<bool> converged;
  std::vector<std::string> failure_flags;  // per pair; empty string when none
  SolveStatus status = SolveStatus::converged;
  std::string note;
};

enum class PrecondKind { none, diagonal_shift };

/// Preconditioner description for LOBPCG.  With diagonal_shift the residual
/// column j is scaled elementwise by 1 / max(d_i - sigma_j, floor) where
/// sigma_j is the fixed shift if given, else the j-th current Ritz value.
struct PreconditionerSpec {
  PrecondKind kind = PrecondKind::none;
  std::optional<double> fixed_shift;
  double floor = 1e-2;
};

enum class BatchMode { coupled_spmm, decouple_after };

struct SolverConfig {
  int n_ev = 5;
  int n_b = 8;
  double tol = 1e-6;
  int maxiter = 200;
  std::uint64_t seed = 0;
  // ChebFSI
  int degree = 10;
  std::optional<double> lambda_cut;  // override for the filter cutoff
  // RMM-DIIS
  int s_max = 15;
  BatchMode batch_mode = BatchMode::coupled_spmm;
  int decouple_after = 0;      // targets that must converge before decoupling
  bool select_nearest = false;  // pick the 2x2 Ritz value nearest the current
  // LOBPCG
  PreconditionerSpec precond;
};

enum class FirstPhase { block_lanczos, lobpcg };
enum class SpmmStrategy { always_spmm, decouple_after };

struct HybridConfig {
  FirstPhase first_phase = FirstPhase::block_lanczos;
  double tau_switch = 1e-7;
  int max_first_iters = 100;
  SpmmStrategy spmm_strategy = SpmmStrategy::always_spmm;
  int decouple_after = 1;  // used with SpmmStrategy::decouple_after
  SolverConfig base;
};

}  // namespace ritz
