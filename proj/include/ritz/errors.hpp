#pragma once

#include <stdexcept>
#include <string>

namespace ritz {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched operand dimensions or otherwise invalid arguments.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// File I/O or format problems (Matrix Market parsing and writing).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Cholesky factorization broke down; `pivot` is the failing pivot index.
class CholeskyError : public Error {
 public:
  CholeskyError(const std::string& msg, int pivot) : Error(msg), pivot(pivot) {}
  int pivot;
};

/// A block of vectors turned out to be numerically rank deficient.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& msg, int estimated_rank)
      : Error(msg), estimated_rank(estimated_rank) {}
  int estimated_rank;
};

/// The Rayleigh-Ritz subspace collapsed below the requested block size.
class SubspaceCollapseError : public Error {
 public:
  SubspaceCollapseError(const std::string& msg, int kept) : Error(msg), kept(kept) {}
  int kept;
};

}  // namespace ritz
