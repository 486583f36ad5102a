// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hopformer/common.hpp"

namespace hopformer {

/// Row-major dense matrix of doubles. The preprocessing-side numeric type.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

constexpr std::int64_t kUnlabeled = -1;

/// Undirected unweighted graph in CSR form, with per-node features and
/// (optional) class labels. Every undirected edge is stored in both
/// directions; column indices are sorted and unique within a row.
struct CsrGraph {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets;  // length n + 1
  std::vector<std::size_t> col_indices;
  DenseMatrix features;              // n x d
  std::vector<std::int64_t> labels;  // length n, kUnlabeled marks unlabeled
  std::size_t num_classes = 0;

  std::size_t feature_dim() const { return features.cols; }
  std::size_t degree(std::size_t v) const { return row_offsets[v + 1] - row_offsets[v]; }
  bool has_edge(std::size_t u, std::size_t v) const;
  void validate() const;
};

/// Symmetrically normalized adjacency with self-loops. Entry (u, v) carries
/// 1 / sqrt(deg(u) * deg(v)) where degrees count the inserted self-loops.
struct NormalizedAdjacency {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<std::size_t> col_indices;
  std::vector<double> weights;

  void validate() const;
};

enum class GraphFormat { EdgeList, Binary };

/// Loads a graph. EdgeList: one "u v" pair per non-comment line, '#' starts a
/// comment; a comment of the form "# nodes: N" declares the node count.
/// Features and labels come from "<path>.features" / "<path>.labels" sidecar
/// files when present. Binary: self-contained container written by
/// save_graph_binary. Missing reverse edges are added and duplicates removed.
CsrGraph load_graph(const std::string& path, GraphFormat format);

void save_graph_binary(const CsrGraph& g, const std::string& path);

/// Builds A_hat = D^{-1/2} (A + I) D^{-1/2}. Self-loops are inserted (and
/// deduplicated if already present); isolated nodes get degree 1.
NormalizedAdjacency normalize(const CsrGraph& g);

/// Sparse-dense product A_hat * m. Accumulation follows CSR order per row, so
/// the result is bitwise deterministic; rows may be processed in parallel.
DenseMatrix spmm(const NormalizedAdjacency& a, const DenseMatrix& m);

/// Connected-component labels in [0, count); returns the component count.
std::size_t connected_components(const NormalizedAdjacency& a, std::vector<std::size_t>* labels_out = nullptr);

/// Builds a CSR graph from an edge list. Edges are symmetrized and
/// deduplicated; ids must lie in [0, n).
CsrGraph graph_from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);

}  // namespace hopformer
