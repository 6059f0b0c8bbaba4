// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Symmetric pairwise-measure matrices (similarity or dissimilarity) and
// their CSV round-trip used to cross-check against external tools.

#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dataset.hpp"

namespace kahc {

enum class MatrixKind { similarity, dissimilarity };

inline const char* to_string(MatrixKind k) {
  return k == MatrixKind::similarity ? "similarity" : "dissimilarity";
}

/// Dense symmetric n x n matrix of pairwise measures.
///
/// Invariants: values symmetric; similarity matrices live in [0,1] with a
/// unit diagonal, dissimilarity matrices are >= 0 with a zero diagonal.
/// measure_tag records how the matrix was produced (measure name plus
/// parameters), for provenance in exports and experiment reports.
struct SimMatrix {
  index_t n = 0;
  MatrixKind kind = MatrixKind::similarity;
  std::string measure_tag;
  std::vector<double> values;  // n*n, row-major

  SimMatrix() = default;
  SimMatrix(index_t n_, MatrixKind kind_, std::string tag)
      : n(n_),
        kind(kind_),
        measure_tag(std::move(tag)),
        values(n_ * n_, 0.0) {
    const double diag = kind == MatrixKind::similarity ? 1.0 : 0.0;
    for (index_t i = 0; i < n; ++i) values[i * n + i] = diag;
  }

  double at(index_t i, index_t j) const { return values[i * n + j]; }
  double& at(index_t i, index_t j) { return values[i * n + j]; }

  /// Writes both (i,j) and (j,i), keeping the matrix symmetric.
  void set(index_t i, index_t j, double v) {
    values[i * n + j] = v;
    values[j * n + i] = v;
  }
};

/// Entrywise 1 - M, flipping a similarity matrix into a dissimilarity
/// matrix.  Throws argument_error if the input is already a dissimilarity.
inline SimMatrix to_dissimilarity(const SimMatrix& m) {
  if (m.kind == MatrixKind::dissimilarity) {
    throw argument_error("to_dissimilarity: matrix is already a dissimilarity");
  }
  SimMatrix out(m.n, MatrixKind::dissimilarity, m.measure_tag);
  for (index_t i = 0; i < m.n * m.n; ++i) out.values[i] = 1.0 - m.values[i];
  return out;
}

/// Dumps a matrix as CSV with the one-line header `kind,measure_tag,n`
/// followed by n rows of %.17g values (bit-exact round trip).
inline void save_matrix_csv(const SimMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw structural_error("cannot open file for writing: " + path);
  out << to_string(m.kind) << ',' << m.measure_tag << ',' << m.n << '\n';
  char buf[64];
  for (index_t i = 0; i < m.n; ++i) {
    for (index_t j = 0; j < m.n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.values[i * m.n + j]);
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

/// Reads a matrix written by save_matrix_csv.  Throws parse_error /
/// structural_error on malformed content.
inline SimMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw structural_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw structural_error("empty matrix file: " + path);
  }
  const auto header = detail::split_csv_line(line);
  if (header.size() != 3) {
    throw structural_error("matrix header must be kind,measure_tag,n");
  }
  MatrixKind kind;
  if (header[0] == "similarity") {
    kind = MatrixKind::similarity;
  } else if (header[0] == "dissimilarity") {
    kind = MatrixKind::dissimilarity;
  } else {
    throw structural_error("unknown matrix kind: " + std::string(header[0]));
  }
  index_t n = 0;
  {
    const auto field = header[2];
    const auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), n);
    if (ec != std::errc{} || ptr != field.data() + field.size() || n == 0) {
      throw structural_error("bad matrix size in header: " +
                             std::string(field));
    }
  }
  SimMatrix m(n, kind, std::string(header[1]));
  for (index_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw structural_error("matrix file truncated at row " +
                             std::to_string(i + 2));
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != n) {
      throw structural_error("row " + std::to_string(i + 2) + ": expected " +
                             std::to_string(n) + " values");
    }
    for (index_t j = 0; j < n; ++j) {
      m.values[i * n + j] = detail::parse_double_field(fields[j], i + 2);
    }
  }
  return m;
}

}  // namespace kahc
