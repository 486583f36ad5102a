// SPDX-License-Identifier: Apache-2.0
#include "hopformer/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hopformer {

namespace {

constexpr std::uint32_t kGraphMagic = 0x52474648;  // "HFGR"
constexpr std::uint32_t kGraphVersion = 1;

using EdgePair = std::pair<std::size_t, std::size_t>;

CsrGraph build_csr(std::size_t n, std::vector<EdgePair> directed) {
  // Symmetrize, then sort + unique gives sorted unique columns per row.
  const std::size_t m0 = directed.size();
  directed.reserve(m0 * 2);
  for (std::size_t i = 0; i < m0; ++i) {
    auto [u, v] = directed[i];
    if (u != v) directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  CsrGraph g;
  g.n = n;
  g.row_offsets.assign(n + 1, 0);
  for (const auto& [u, v] : directed) g.row_offsets[u + 1]++;
  for (std::size_t i = 0; i < n; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
  g.col_indices.reserve(directed.size());
  for (const auto& [u, v] : directed) g.col_indices.push_back(v);
  g.labels.assign(n, kUnlabeled);
  return g;
}

bool parse_size(const std::string& tok, std::size_t* out) {
  if (tok.empty()) return false;
  std::size_t v = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  *out = v;
  return true;
}

// Recognizes "# nodes: N" (and "# nodes N" / "#nodes: N") directives.
bool parse_nodes_directive(const std::string& line, std::size_t* n_out) {
  std::string body = line.substr(1);
  std::replace(body.begin(), body.end(), ':', ' ');
  std::istringstream is(body);
  std::string word;
  if (!(is >> word) || word != "nodes") return false;
  std::string num;
  if (!(is >> num)) return false;
  return parse_size(num, n_out);
}

DenseMatrix load_features_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) {
      throw ValidationError(path + ": malformed feature row at line " + std::to_string(lineno));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(path + ": inconsistent feature width at line " + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  DenseMatrix x(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(), x.row(r).begin());
  }
  return x;
}

std::vector<std::int64_t> load_labels_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  std::vector<std::int64_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line == "?") {
      labels.push_back(kUnlabeled);
      continue;
    }
    std::istringstream is(line);
    std::int64_t v;
    std::string rest;
    if (!(is >> v) || (is >> rest)) {
      throw ValidationError(path + ": malformed label at line " + std::to_string(lineno));
    }
    labels.push_back(v);
  }
  return labels;
}

CsrGraph load_graph_edgelist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file: " + path);

  std::vector<EdgePair> edges;
  std::size_t declared_n = 0;
  bool have_declared_n = false;
  std::size_t max_id = 0;
  bool any_id = false;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') {
      std::size_t n;
      if (parse_nodes_directive(line.substr(start), &n)) {
        declared_n = n;
        have_declared_n = true;
      }
      continue;
    }
    std::istringstream is(line);
    std::string a, b, extra;
    if (!(is >> a >> b) || (is >> extra)) {
      throw ValidationError(path + ": malformed line " + std::to_string(lineno) + ": expected 'u v'");
    }
    std::size_t u, v;
    if (!parse_size(a, &u) || !parse_size(b, &v)) {
      throw ValidationError(path + ": malformed line " + std::to_string(lineno) + ": expected 'u v'");
    }
    if (have_declared_n && (u >= declared_n || v >= declared_n)) {
      throw ValidationError(path + ": node id out of range at line " + std::to_string(lineno));
    }
    max_id = std::max({max_id, u, v});
    any_id = true;
    edges.emplace_back(u, v);
  }

  DenseMatrix features;
  const std::string feat_path = path + ".features";
  const bool have_features = std::filesystem::exists(feat_path);
  if (have_features) features = load_features_text(feat_path);

  std::size_t n;
  if (have_declared_n) {
    n = declared_n;
  } else if (have_features) {
    n = features.rows;
    if (any_id && max_id >= n) {
      throw ValidationError(path + ": node id out of range (feature file declares " + std::to_string(n) + " nodes)");
    }
  } else {
    n = any_id ? max_id + 1 : 0;
  }
  if (n == 0) throw ValidationError(path + ": graph has no nodes");

  CsrGraph g = build_csr(n, std::move(edges));
  if (have_features) {
    if (features.rows != n) {
      throw ValidationError(feat_path + ": feature-row count " + std::to_string(features.rows) +
                            " != node count " + std::to_string(n));
    }
    g.features = std::move(features);
  } else {
    g.features = DenseMatrix(n, 0);
  }

  const std::string label_path = path + ".labels";
  if (std::filesystem::exists(label_path)) {
    auto labels = load_labels_text(label_path);
    if (labels.size() != n) {
      throw ValidationError(label_path + ": label count " + std::to_string(labels.size()) +
                            " != node count " + std::to_string(n));
    }
    std::int64_t max_label = -1;
    for (std::int64_t l : labels) {
      if (l < kUnlabeled) throw ValidationError(label_path + ": negative label " + std::to_string(l));
      max_label = std::max(max_label, l);
    }
    g.labels = std::move(labels);
    g.num_classes = static_cast<std::size_t>(max_label + 1);
  }

  g.validate();
  return g;
}

CsrGraph load_graph_binary(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size());
  if (r.remaining() < 8 || r.u32() != kGraphMagic) throw ValidationError(path + ": not a graph container");
  const std::uint32_t version = r.u32();
  if (version != kGraphVersion) {
    throw ValidationError(path + ": unsupported graph container version " + std::to_string(version));
  }
  CsrGraph g;
  g.n = r.u64();
  const std::size_t m = r.u64();
  const std::size_t d = r.u64();
  g.num_classes = r.u64();
  g.row_offsets.resize(g.n + 1);
  for (auto& v : g.row_offsets) v = r.u64();
  g.col_indices.resize(m);
  for (auto& v : g.col_indices) v = r.u64();
  g.features = DenseMatrix(g.n, d);
  r.bytes(g.features.data.data(), g.n * d * sizeof(double));
  g.labels.resize(g.n);
  for (auto& v : g.labels) v = r.i64();
  g.validate();
  return g;
}

}  // namespace

bool CsrGraph::has_edge(std::size_t u, std::size_t v) const {
  const auto* b = col_indices.data() + row_offsets[u];
  const auto* e = col_indices.data() + row_offsets[u + 1];
  return std::binary_search(b, e, v);
}

void CsrGraph::validate() const {
  if (row_offsets.size() != n + 1) throw ValidationError("CsrGraph: row_offsets length != n + 1");
  if (row_offsets[0] != 0 || row_offsets[n] != col_indices.size()) {
    throw ValidationError("CsrGraph: row_offsets must start at 0 and end at len(col_indices)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (row_offsets[i + 1] < row_offsets[i]) throw ValidationError("CsrGraph: row_offsets not non-decreasing");
    for (std::size_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
      if (col_indices[e] >= n) throw ValidationError("CsrGraph: node id out of range");
      if (e > row_offsets[i] && col_indices[e] <= col_indices[e - 1]) {
        throw ValidationError("CsrGraph: duplicate or unsorted column index in row " + std::to_string(i));
      }
    }
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t e = row_offsets[u]; e < row_offsets[u + 1]; ++e) {
      const std::size_t v = col_indices[e];
      if (u != v && !has_edge(v, u)) {
        throw ValidationError("CsrGraph: missing reverse edge for (" + std::to_string(u) + ", " + std::to_string(v) + ")");
      }
    }
  }
  if (features.rows != 0 && features.rows != n) throw ValidationError("CsrGraph: feature-row count != n");
  if (!labels.empty() && labels.size() != n) throw ValidationError("CsrGraph: label count != n");
  for (std::int64_t l : labels) {
    if (l != kUnlabeled && (l < 0 || static_cast<std::size_t>(l) >= num_classes)) {
      throw ValidationError("CsrGraph: label out of range");
    }
  }
}

void NormalizedAdjacency::validate() const {
  if (row_offsets.size() != n + 1 || weights.size() != col_indices.size()) {
    throw ValidationError("NormalizedAdjacency: inconsistent arrays");
  }
  std::vector<double> inv_deg(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    bool self = false;
    for (std::size_t e = row_offsets[u]; e < row_offsets[u + 1]; ++e) {
      if (col_indices[e] == u) {
        self = true;
        inv_deg[u] = weights[e];  // self weight is 1 / deg(u)
      }
      if (weights[e] <= 0.0) throw ValidationError("NormalizedAdjacency: non-positive weight");
    }
    if (!self) throw ValidationError("NormalizedAdjacency: missing self-loop at node " + std::to_string(u));
  }
  // Every entry must be 1 / sqrt(deg(u) * deg(v)).
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t e = row_offsets[u]; e < row_offsets[u + 1]; ++e) {
      const double expected = std::sqrt(inv_deg[u] * inv_deg[col_indices[e]]);
      if (std::abs(weights[e] - expected) > 1e-12) {
        throw ValidationError("NormalizedAdjacency: weight at (" + std::to_string(u) + ", " +
                              std::to_string(col_indices[e]) + ") breaks the degree normalization");
      }
    }
  }
}

CsrGraph load_graph(const std::string& path, GraphFormat format) {
  switch (format) {
    case GraphFormat::EdgeList:
      return load_graph_edgelist(path);
    case GraphFormat::Binary:
      return load_graph_binary(path);
  }
  throw ValidationError("unknown graph format");
}

void save_graph_binary(const CsrGraph& g, const std::string& path) {
  std::vector<std::uint8_t> out;
  out.reserve(64 + g.col_indices.size() * 8 + g.features.data.size() * 8 + g.n * 8);
  put_u32(out, kGraphMagic);
  put_u32(out, kGraphVersion);
  put_u64(out, g.n);
  put_u64(out, g.col_indices.size());
  put_u64(out, g.features.cols);
  put_u64(out, g.num_classes);
  for (auto v : g.row_offsets) put_u64(out, v);
  for (auto v : g.col_indices) put_u64(out, v);
  const auto* fp = reinterpret_cast<const std::uint8_t*>(g.features.data.data());
  out.insert(out.end(), fp, fp + g.features.data.size() * sizeof(double));
  std::vector<std::int64_t> labels = g.labels;
  if (labels.empty()) labels.assign(g.n, kUnlabeled);
  for (auto v : labels) put_i64(out, v);
  write_file(path, out);
}

NormalizedAdjacency normalize(const CsrGraph& g) {
  NormalizedAdjacency a;
  a.n = g.n;
  a.row_offsets.assign(g.n + 1, 0);

  // Union with the identity; input self-loops collapse into the inserted one.
  std::vector<std::size_t> row_len(g.n, 0);
  for (std::size_t u = 0; u < g.n; ++u) {
    row_len[u] = g.degree(u) + (g.has_edge(u, u) ? 0 : 1);
    a.row_offsets[u + 1] = a.row_offsets[u] + row_len[u];
  }
  a.col_indices.resize(a.row_offsets[g.n]);
  a.weights.resize(a.row_offsets[g.n]);

  for (std::size_t u = 0; u < g.n; ++u) {
    std::size_t w = a.row_offsets[u];
    bool placed_self = false;
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e) {
      const std::size_t v = g.col_indices[e];
      if (!placed_self && v >= u) {
        if (v != u) a.col_indices[w++] = u;
        placed_self = true;
      }
      a.col_indices[w++] = v;
    }
    if (!placed_self) a.col_indices[w++] = u;
  }

  for (std::size_t u = 0; u < g.n; ++u) {
    const double du = static_cast<double>(row_len[u]);
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      const double dv = static_cast<double>(row_len[a.col_indices[e]]);
      a.weights[e] = 1.0 / std::sqrt(du * dv);
    }
  }
  return a;
}

DenseMatrix spmm(const NormalizedAdjacency& a, const DenseMatrix& m) {
  if (m.rows != a.n) {
    throw ValidationError("spmm: dimension mismatch, adjacency has " + std::to_string(a.n) +
                          " rows but matrix has " + std::to_string(m.rows));
  }
  DenseMatrix out(a.n, m.cols);
  parallel_for(a.n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      double* dst = out.data.data() + r * m.cols;
      for (std::size_t e = a.row_offsets[r]; e < a.row_offsets[r + 1]; ++e) {
        const double w = a.weights[e];
        const double* src = m.data.data() + a.col_indices[e] * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] += w * src[c];
      }
    }
  });
  return out;
}

std::size_t connected_components(const NormalizedAdjacency& a, std::vector<std::size_t>* labels_out) {
  std::vector<std::size_t> comp(a.n, static_cast<std::size_t>(-1));
  std::vector<std::size_t> stack;
  std::size_t count = 0;
  for (std::size_t s = 0; s < a.n; ++s) {
    if (comp[s] != static_cast<std::size_t>(-1)) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
        const std::size_t v = a.col_indices[e];
        if (comp[v] == static_cast<std::size_t>(-1)) {
          comp[v] = count;
          stack.push_back(v);
        }
      }
    }
    ++count;
  }
  if (labels_out) *labels_out = std::move(comp);
  return count;
}

CsrGraph graph_from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<EdgePair> es(edges.begin(), edges.end());
  for (const auto& [u, v] : es) {
    if (u >= n || v >= n) throw ValidationError("graph_from_edges: node id out of range");
  }
  CsrGraph g = build_csr(n, std::move(es));
  g.features = DenseMatrix(n, 0);
  return g;
}

}  // namespace hopformer
