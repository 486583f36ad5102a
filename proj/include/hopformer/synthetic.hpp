// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "hopformer/graph.hpp"
#include "hopformer/rng.hpp"

namespace hopformer {

/// Erdos-Renyi graph on n nodes, each undirected pair present with
/// probability p. Features and labels are left empty.
inline CsrGraph erdos_renyi(std::size_t n, double p, RngStream& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  return graph_from_edges(n, edges);
}

/// Random feature matrix with entries uniform in [-1, 1].
inline DenseMatrix random_features(std::size_t n, std::size_t d, RngStream& rng) {
  DenseMatrix x(n, d);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

/// Two-block stochastic block model. Nodes [0, n/2) are class 0, the rest
/// class 1; intra-block edges appear with intra_p, cross-block with inter_p.
/// Features are a class indicator plus Gaussian noise, so one propagation hop
/// makes the classes nearly separable.
inline CsrGraph two_block_sbm(std::size_t n, double intra_p, double inter_p, double noise_sigma, RngStream& rng) {
  const std::size_t half = n / 2;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const bool same = (u < half) == (v < half);
      if (rng.uniform() < (same ? intra_p : inter_p)) edges.emplace_back(u, v);
    }
  }
  CsrGraph g = graph_from_edges(n, edges);
  g.features = DenseMatrix(n, 2);
  g.labels.assign(n, 0);
  g.num_classes = 2;
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t cls = v < half ? 0 : 1;
    g.labels[v] = static_cast<std::int64_t>(cls);
    g.features.at(v, 0) = (cls == 0 ? 1.0 : 0.0) + noise_sigma * rng.normal();
    g.features.at(v, 1) = (cls == 1 ? 1.0 : 0.0) + noise_sigma * rng.normal();
  }
  return g;
}

/// Ring graph (cycle) with uniform random features; cheap to build at any n.
inline CsrGraph ring_graph(std::size_t n, std::size_t feature_dim, RngStream& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n);
  for (std::size_t v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  if (n > 2) edges.emplace_back(n - 1, 0);
  CsrGraph g = graph_from_edges(n, edges);
  g.features = random_features(n, feature_dim, rng);
  g.labels.assign(n, 0);
  g.num_classes = 2;
  for (std::size_t v = 0; v < n; ++v) g.labels[v] = static_cast<std::int64_t>(v % 2);
  return g;
}

}  // namespace hopformer
