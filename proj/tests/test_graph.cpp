// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hopformer/graph.hpp"
#include "hopformer/rng.hpp"
#include "hopformer/synthetic.hpp"
#include "support/testutil.hpp"

using namespace hopformer;
using hoptest::TempDir;

TEST_CASE("edge-list load keeps features and symmetrizes") {
  TempDir dir;
  const std::string path = dir.file("g.edges");
  hoptest::write_text(path, "# a tiny graph\n0 1\n");
  hoptest::write_text(path + ".features", "1\n2\n");

  CsrGraph g = load_graph(path, GraphFormat::EdgeList);
  CHECK(g.n == 2);
  CHECK(g.col_indices.size() == 2);  // both directions
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(g.feature_dim() == 1);
  CHECK(g.features.at(0, 0) == 1.0);
  CHECK(g.features.at(1, 0) == 2.0);
}

TEST_CASE("symmetrization is idempotent under duplicate edges") {
  TempDir dir;
  const std::string a = dir.file("a.edges");
  const std::string b = dir.file("b.edges");
  hoptest::write_text(a, "0 1\n");
  hoptest::write_text(b, "0 1\n1 0\n");
  hoptest::write_text(a + ".features", "1\n2\n");
  hoptest::write_text(b + ".features", "1\n2\n");
  CsrGraph ga = load_graph(a, GraphFormat::EdgeList);
  CsrGraph gb = load_graph(b, GraphFormat::EdgeList);
  CHECK(ga.row_offsets == gb.row_offsets);
  CHECK(ga.col_indices == gb.col_indices);
}

TEST_CASE("node id beyond the declared count is rejected") {
  TempDir dir;
  const std::string path = dir.file("g.edges");
  hoptest::write_text(path, "# nodes: 3\n0 1\n0 5\n");
  CHECK_THROWS_WITH_AS(load_graph(path, GraphFormat::EdgeList), doctest::Contains("node id out of range"),
                       ValidationError);
}

TEST_CASE("malformed line reports its number") {
  TempDir dir;
  const std::string path = dir.file("g.edges");
  hoptest::write_text(path, "0 1\nnot an edge at all\n");
  CHECK_THROWS_WITH_AS(load_graph(path, GraphFormat::EdgeList), doctest::Contains("line 2"), ValidationError);
}

TEST_CASE("feature row count must match the node count") {
  TempDir dir;
  const std::string path = dir.file("g.edges");
  hoptest::write_text(path, "# nodes: 3\n0 1\n");
  hoptest::write_text(path + ".features", "1\n2\n");
  CHECK_THROWS_WITH_AS(load_graph(path, GraphFormat::EdgeList), doctest::Contains("feature-row count"),
                       ValidationError);
}

TEST_CASE("labels sidecar sets classes and unlabeled markers") {
  TempDir dir;
  const std::string path = dir.file("g.edges");
  hoptest::write_text(path, "0 1\n1 2\n");
  hoptest::write_text(path + ".features", "1 0\n0 1\n1 1\n");
  hoptest::write_text(path + ".labels", "0\n-1\n2\n");
  CsrGraph g = load_graph(path, GraphFormat::EdgeList);
  CHECK(g.num_classes == 3);
  CHECK(g.labels[1] == kUnlabeled);
}

TEST_CASE("binary container round-trips") {
  TempDir dir;
  RngStream rng(3);
  CsrGraph g = erdos_renyi(17, 0.3, rng);
  g.features = random_features(17, 5, rng);
  g.labels.assign(17, 0);
  for (std::size_t v = 0; v < 17; ++v) g.labels[v] = static_cast<std::int64_t>(v % 3);
  g.num_classes = 3;

  const std::string path = dir.file("g.bin");
  save_graph_binary(g, path);
  CsrGraph h = load_graph(path, GraphFormat::Binary);
  CHECK(h.n == g.n);
  CHECK(h.row_offsets == g.row_offsets);
  CHECK(h.col_indices == g.col_indices);
  CHECK(h.features.data == g.features.data);
  CHECK(h.labels == g.labels);
  CHECK(h.num_classes == 3);

  SUBCASE("wrong magic is rejected") {
    hoptest::write_text(dir.file("junk.bin"), "definitely not a graph");
    CHECK_THROWS_AS(load_graph(dir.file("junk.bin"), GraphFormat::Binary), ValidationError);
  }
}

TEST_CASE("normalize: single edge gives the half matrix") {
  CsrGraph g = graph_from_edges(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  NormalizedAdjacency a = normalize(g);
  a.validate();
  // deg = (2, 2): every entry is exactly 0.5.
  REQUIRE(a.col_indices.size() == 4);
  for (double w : a.weights) CHECK(w == 0.5);
}

TEST_CASE("normalize: empty edge set gives the identity") {
  CsrGraph g = graph_from_edges(3, std::vector<std::pair<std::size_t, std::size_t>>{});
  NormalizedAdjacency a = normalize(g);
  a.validate();
  REQUIRE(a.col_indices.size() == 3);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(a.col_indices[a.row_offsets[v]] == v);
    CHECK(a.weights[a.row_offsets[v]] == 1.0);
  }
}

TEST_CASE("normalize: path graph matches hand-computed weights") {
  CsrGraph g = graph_from_edges(3, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}});
  NormalizedAdjacency a = normalize(g);
  auto weight = [&](std::size_t u, std::size_t v) {
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      if (a.col_indices[e] == v) return a.weights[e];
    }
    return 0.0;
  };
  CHECK(weight(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(weight(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(weight(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(weight(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(weight(2, 2) == doctest::Approx(0.5).epsilon(1e-15));

  // And the dense oracle agrees everywhere.
  const DenseMatrix dense = hoptest::dense_normalized_oracle(g);
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(weight(u, v) == doctest::Approx(dense.at(u, v)).epsilon(1e-15));
    }
  }
}

TEST_CASE("normalize: pre-existing self-loops collapse into the inserted one") {
  CsrGraph plain = graph_from_edges(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  CsrGraph loopy = graph_from_edges(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 0}});
  NormalizedAdjacency a = normalize(plain);
  NormalizedAdjacency b = normalize(loopy);
  CHECK(a.row_offsets == b.row_offsets);
  CHECK(a.col_indices == b.col_indices);
  CHECK(a.weights == b.weights);
}

TEST_CASE("normalize: structure is stable when applied to its own output") {
  RngStream rng(11);
  CsrGraph g = erdos_renyi(20, 0.2, rng);
  NormalizedAdjacency a1 = normalize(g);
  // Rebuild a CsrGraph from a1's structure (it already holds self-loops).
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < a1.n; ++u) {
    for (std::size_t e = a1.row_offsets[u]; e < a1.row_offsets[u + 1]; ++e) edges.emplace_back(u, a1.col_indices[e]);
  }
  NormalizedAdjacency a2 = normalize(graph_from_edges(a1.n, edges));
  CHECK(a1.row_offsets == a2.row_offsets);
  CHECK(a1.col_indices == a2.col_indices);
}

TEST_CASE("spmm basics") {
  SUBCASE("identity adjacency leaves the matrix unchanged") {
    CsrGraph g = graph_from_edges(3, std::vector<std::pair<std::size_t, std::size_t>>{});
    NormalizedAdjacency a = normalize(g);
    RngStream rng(5);
    DenseMatrix m = random_features(3, 4, rng);
    DenseMatrix out = spmm(a, m);
    CHECK(out.data == m.data);
  }
  SUBCASE("single edge averages the two rows") {
    CsrGraph g = graph_from_edges(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
    NormalizedAdjacency a = normalize(g);
    DenseMatrix m(2, 1);
    m.at(0, 0) = 1.0;
    m.at(1, 0) = 3.0;
    DenseMatrix out = spmm(a, m);
    CHECK(out.at(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("zero input stays zero") {
    RngStream rng(6);
    CsrGraph g = erdos_renyi(10, 0.3, rng);
    NormalizedAdjacency a = normalize(g);
    DenseMatrix zeros(10, 3);
    DenseMatrix out = spmm(a, zeros);
    for (double v : out.data) CHECK(v == 0.0);
  }
  SUBCASE("row mismatch is rejected") {
    CsrGraph g = graph_from_edges(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
    NormalizedAdjacency a = normalize(g);
    DenseMatrix m(3, 1);
    CHECK_THROWS_AS(spmm(a, m), ValidationError);
  }
}

TEST_CASE("spmm equals the dense oracle on random graphs") {
  RngStream rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    CsrGraph g = erdos_renyi(n, 0.15, rng);
    NormalizedAdjacency a = normalize(g);
    a.validate();
    DenseMatrix m = random_features(n, 1 + rng.below(5), rng);
    DenseMatrix sparse_out = spmm(a, m);
    DenseMatrix dense_out = hoptest::dense_mul(hoptest::dense_normalized_oracle(g), m);
    for (std::size_t i = 0; i < sparse_out.data.size(); ++i) {
      CHECK(std::abs(sparse_out.data[i] - dense_out.data[i]) <= 1e-12);
    }
  }
}

TEST_CASE("constant vector is preserved exactly on regular graphs with power-of-two degree") {
  // K4 (degree 3 + self-loop = 4) and a perfect matching (degree 1 + 1 = 2):
  // the weights are exact binary fractions, so row sums are exactly 1.
  SUBCASE("complete graph on four nodes") {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t u = 0; u < 4; ++u) {
      for (std::size_t v = u + 1; v < 4; ++v) edges.emplace_back(u, v);
    }
    NormalizedAdjacency a = normalize(graph_from_edges(4, edges));
    DenseMatrix ones(4, 1);
    for (auto& v : ones.data) v = 1.0;
    DenseMatrix out = spmm(a, ones);
    for (double v : out.data) CHECK(v == 1.0);
  }
  SUBCASE("perfect matching") {
    NormalizedAdjacency a =
        normalize(graph_from_edges(6, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {2, 3}, {4, 5}}));
    DenseMatrix ones(6, 1);
    for (auto& v : ones.data) v = 1.0;
    DenseMatrix out = spmm(a, ones);
    for (double v : out.data) CHECK(v == 1.0);
  }
  SUBCASE("cycle is preserved to rounding") {
    std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}};
    NormalizedAdjacency a = normalize(graph_from_edges(5, edges));
    DenseMatrix ones(5, 1);
    for (auto& v : ones.data) v = 1.0;
    DenseMatrix out = spmm(a, ones);
    for (double v : out.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("spectral radius of the normalized adjacency is at most 1") {
  RngStream rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    CsrGraph g = erdos_renyi(2 + rng.below(30), 0.2, rng);
    const DenseMatrix dense = hoptest::dense_normalized_oracle(g);
    CHECK(hoptest::spectral_radius(dense) <= 1.0 + 1e-9);
  }
}

TEST_CASE("spmm is bitwise stable under the worker-thread cap") {
  RngStream rng(77);
  CsrGraph g = erdos_renyi(200, 0.05, rng);
  NormalizedAdjacency a = normalize(g);
  DenseMatrix m = random_features(200, 7, rng);
  DenseMatrix serial = spmm(a, m);
  setenv("HOPFORMER_THREADS", "4", 1);
  DenseMatrix parallel = spmm(a, m);
  unsetenv("HOPFORMER_THREADS");
  CHECK(serial.data == parallel.data);
}

TEST_CASE("graph validate catches structural damage") {
  CsrGraph g = graph_from_edges(3, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  g.validate();
  SUBCASE("missing reverse edge") {
    g.col_indices[g.row_offsets[1]] = 2;  // 1 -> 2 without 2 -> 1
    CHECK_THROWS_AS(g.validate(), ValidationError);
  }
  SUBCASE("offsets drift") {
    g.row_offsets[3] += 1;
    CHECK_THROWS_AS(g.validate(), ValidationError);
  }
}
