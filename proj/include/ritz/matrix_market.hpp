#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ritz/sparse.hpp"

namespace ritz {

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    std::size_t p = line.find_first_not_of(" \t\r\n");
    if (p == std::string::npos) continue;
    if (line[p] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

/// Read a Matrix Market coordinate file (real, general or symmetric).
/// A "symmetric" header maps to lower-half storage; "general" maps to full
/// storage with the symmetry invariant verified on construction.
inline SparseSymMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string header;
  if (!std::getline(in, header)) throw IoError(path + ": empty file");
  std::istringstream hs(detail::lower(header));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket")
    throw IoError(path + ": missing %%MatrixMarket banner");
  if (object != "matrix" || format != "coordinate")
    throw IoError(path + ": expected 'matrix coordinate' header, got '" + header + "'");
  if (field != "real")
    throw IoError(path + ": only real matrices are supported, got field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw IoError(path + ": unsupported symmetry qualifier '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  std::string line;
  if (!detail::next_data_line(in, line)) throw IoError(path + ": missing size line");
  Index rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> rows >> cols >> nnz)) throw IoError(path + ": malformed size line '" + line + "'");
  }
  if (rows != cols) throw IoError(path + ": matrix is not square");
  if (rows <= 0 || nnz < 0) throw IoError(path + ": invalid dimensions");

  std::vector<std::tuple<Index, Index, double>> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (Index k = 0; k < nnz; ++k) {
    if (!detail::next_data_line(in, line))
      throw IoError(path + ": expected " + std::to_string(nnz) + " entries, file ended after " +
                    std::to_string(k));
    std::istringstream ls(line);
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(ls >> i >> j >> v)) throw IoError(path + ": malformed entry line '" + line + "'");
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw IoError(path + ": entry index out of range in line '" + line + "'");
    if (symmetric && j > i)
      throw IoError(path + ": upper-triangle entry in symmetric file: '" + line + "'");
    entries.emplace_back(i - 1, j - 1, v);
  }

  try {
    return SparseSymMatrix::from_coo(rows, std::move(entries),
                                     symmetric ? StorageMode::lower_half : StorageMode::full);
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
}

/// Write in Matrix Market coordinate format, values at 17 significant digits
/// so a read-back reproduces the matrix exactly.  Lower-half storage emits the
/// "symmetric" qualifier, full storage emits "general".
inline void write_matrix_market(const SparseSymMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const bool symmetric = a.storage_mode() == StorageMode::lower_half;
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << "\n";
  out << a.dim() << " " << a.dim() << " " << a.nnz_stored() << "\n";
  char buf[64];
  for (Index i = 0; i < a.dim(); ++i) {
    for (Index k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k) {
      std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n", static_cast<long long>(i + 1),
                    static_cast<long long>(a.col_indices()[k] + 1), a.values()[k]);
      out << buf;
    }
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

/// Write a dense block in Matrix Market array format (used for eigenvector /
/// initial-guess files).
inline void write_block_array(const ColumnBlock& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "%%MatrixMarket matrix array real general\n";
  out << x.rows() << " " << x.cols() << "\n";
  char buf[48];
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", x(i, j));
      out << buf;
    }
  if (!out) throw IoError("error while writing '" + path + "'");
}

inline ColumnBlock read_block_array(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string header;
  if (!std::getline(in, header)) throw IoError(path + ": empty file");
  std::istringstream hs(detail::lower(header));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix" || format != "array" || field != "real" ||
      symmetry != "general")
    throw IoError(path + ": expected '%%MatrixMarket matrix array real general'");
  std::string line;
  if (!detail::next_data_line(in, line)) throw IoError(path + ": missing size line");
  Index rows = 0, cols = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> rows >> cols)) throw IoError(path + ": malformed size line");
  }
  if (rows <= 0 || cols <= 0) throw IoError(path + ": invalid block dimensions");
  ColumnBlock x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      if (!detail::next_data_line(in, line)) throw IoError(path + ": truncated array data");
      std::istringstream ls(line);
      if (!(ls >> x(i, j))) throw IoError(path + ": malformed value line '" + line + "'");
    }
  if (!x.all_finite()) throw IoError(path + ": block contains non-finite values");
  return x;
}

}  // namespace ritz
