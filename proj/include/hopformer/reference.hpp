// SPDX-License-Identifier: Apache-2.0
//
// Dense reference implementations used to cross-check the sparse pipeline.
// These stay deliberately independent of the CSR code paths: plain dense
// matrices, plain triple-loop products.
#pragma once

#include "hopformer/graph.hpp"

namespace hopformer {

inline DenseMatrix dense_adjacency(const NormalizedAdjacency& a) {
  DenseMatrix m(a.n, a.n);
  for (std::size_t u = 0; u < a.n; ++u) {
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      m.at(u, a.col_indices[e]) = a.weights[e];
    }
  }
  return m;
}

inline DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw ValidationError("dense_matmul: inner dimension mismatch");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double v = a.at(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += v * b.at(k, j);
    }
  }
  return c;
}

/// A_hat^k * x via dense products.
inline DenseMatrix dense_power_apply(const NormalizedAdjacency& a, const DenseMatrix& x, std::size_t k) {
  const DenseMatrix adj = dense_adjacency(a);
  DenseMatrix out = x;
  for (std::size_t i = 0; i < k; ++i) out = dense_matmul(adj, out);
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ValidationError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// max |a - b| / max(1, |a|, |b|), elementwise.
inline double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ValidationError("max_rel_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a.data[i]), std::abs(b.data[i])});
    m = std::max(m, std::abs(a.data[i] - b.data[i]) / scale);
  }
  return m;
}

}  // namespace hopformer
