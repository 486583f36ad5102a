// SPDX-License-Identifier: Apache-2.0
#include "hopformer/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hopformer/rng.hpp"

namespace hopformer {

namespace {

constexpr std::uint32_t kEncodingMagic = 0x45534648;  // "HFSE"
constexpr std::uint32_t kEncodingVersion = 1;

void fix_column_sign(double* col, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(col[i]) > 1e-8) {
      if (col[i] < 0.0) {
        for (std::size_t j = 0; j < n; ++j) col[j] = -col[j];
      }
      return;
    }
  }
}

// y = (I - A_hat) x
void laplacian_apply(const NormalizedAdjacency& a, const double* x, double* y) {
  for (std::size_t u = 0; u < a.n; ++u) {
    double acc = x[u];
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      acc -= a.weights[e] * x[a.col_indices[e]];
    }
    y[u] = acc;
  }
}

// Orthonormal basis of the kernel of L: one D^{1/2}-scaled indicator per
// connected component.
std::vector<std::vector<double>> kernel_basis(const NormalizedAdjacency& a, std::size_t n_components,
                                              const std::vector<std::size_t>& comp) {
  std::vector<double> sqrt_deg(a.n);
  for (std::size_t u = 0; u < a.n; ++u) {
    double inv = 0.0;
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      if (a.col_indices[e] == u) inv = a.weights[e];  // 1 / deg(u)
    }
    sqrt_deg[u] = 1.0 / std::sqrt(inv);
  }
  std::vector<std::vector<double>> basis(n_components, std::vector<double>(a.n, 0.0));
  std::vector<double> norms(n_components, 0.0);
  for (std::size_t u = 0; u < a.n; ++u) {
    basis[comp[u]][u] = sqrt_deg[u];
    norms[comp[u]] += sqrt_deg[u] * sqrt_deg[u];
  }
  for (std::size_t c = 0; c < n_components; ++c) {
    const double inv = 1.0 / std::sqrt(norms[c]);
    for (double& v : basis[c]) v *= inv;
  }
  return basis;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

StructuralEncoding dense_eigvecs(const NormalizedAdjacency& a, std::size_t s) {
  const std::size_t n = a.n;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t e = a.row_offsets[u]; e < a.row_offsets[u + 1]; ++e) {
      lap(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(a.col_indices[e])) -= a.weights[e];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericError("dense eigendecomposition failed");

  StructuralEncoding enc;
  enc.s = s;
  enc.u = DenseMatrix(n, s);
  enc.eigenvalues.reserve(s);
  std::size_t taken = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n) && taken < s; ++i) {
    const double lambda = solver.eigenvalues()(i);
    if (lambda <= kTrivialEigenvalueThreshold) continue;
    for (std::size_t r = 0; r < n; ++r) {
      enc.u.at(r, taken) = solver.eigenvectors()(static_cast<Eigen::Index>(r), i);
    }
    enc.eigenvalues.push_back(lambda);
    ++taken;
  }
  if (taken < s) {
    throw ValidationError("requested " + std::to_string(s) + " non-trivial eigenvalues but only " +
                          std::to_string(taken) + " exist");
  }
  return enc;
}

struct RitzPair {
  double lambda;
  std::vector<double> vec;
};

// One plain Lanczos sequence with full reorthogonalization, deflated against
// `deflation`. Runs until the `want` smallest Ritz pairs converge, the Krylov
// space is exhausted, or the iteration budget runs out. Returns every
// converged Ritz pair of the sequence (ascending) and charges the iterations
// taken to *budget.
std::vector<RitzPair> lanczos_sequence(const NormalizedAdjacency& a,
                                       const std::vector<std::vector<double>>& deflation, std::size_t want,
                                       double tolerance, RngStream& rng, std::size_t* budget) {
  const std::size_t n = a.n;
  std::vector<std::vector<double>> basis;
  std::vector<double> alphas, betas;

  auto project_out = [&](std::vector<double>& w) {
    for (const auto& d : deflation) axpy(-dot(d, w), d, w);
    for (const auto& q : basis) axpy(-dot(q, w), q, w);
  };

  {
    std::vector<double> v(n);
    bool ok = false;
    for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      project_out(v);
      project_out(v);
      const double nv = norm(v);
      if (nv > 1e-10) {
        for (auto& x : v) x /= nv;
        ok = true;
      }
    }
    if (!ok) return {};  // nothing left orthogonal to the deflation set
    basis.push_back(std::move(v));
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  auto tridiag_eigs = [&]() {
    const Eigen::Index m = static_cast<Eigen::Index>(alphas.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alphas[static_cast<std::size_t>(i)];
      if (i + 1 < m) {
        t(i, i + 1) = t(i + 1, i) = betas[static_cast<std::size_t>(i)];
      }
    }
    tri.compute(t);
  };

  std::vector<double> w(n);
  double pending_beta = 0.0;
  bool exhausted = false;

  while (*budget > 0) {
    --(*budget);
    laplacian_apply(a, basis.back().data(), w.data());
    alphas.push_back(dot(basis.back(), w));
    project_out(w);  // full reorthogonalization, two passes
    project_out(w);
    pending_beta = norm(w);
    exhausted = pending_beta <= 1e-12 || basis.size() >= n;

    if (exhausted || alphas.size() % 8 == 0 || *budget == 0) {
      tridiag_eigs();
      const std::size_t m = alphas.size();
      const double tail = exhausted ? 0.0 : pending_beta;
      std::size_t ok = 0;
      for (std::size_t i = 0; i < std::min(want, m); ++i) {
        const double resid = std::abs(tail * tri.eigenvectors()(static_cast<Eigen::Index>(m - 1),
                                                                static_cast<Eigen::Index>(i)));
        if (resid <= tolerance) ++ok;
      }
      if (exhausted || ok >= std::min(want, m)) break;
    }
    if (!exhausted) {
      betas.push_back(pending_beta);
      std::vector<double> next(n);
      for (std::size_t i = 0; i < n; ++i) next[i] = w[i] / pending_beta;
      basis.push_back(std::move(next));
    }
  }
  if (alphas.empty()) return {};

  tridiag_eigs();
  const std::size_t m = alphas.size();
  const double tail = exhausted ? 0.0 : pending_beta;
  std::vector<RitzPair> out;
  for (std::size_t i = 0; i < m; ++i) {
    const double resid =
        std::abs(tail * tri.eigenvectors()(static_cast<Eigen::Index>(m - 1), static_cast<Eigen::Index>(i)));
    if (resid > tolerance) continue;
    RitzPair pair;
    pair.lambda = tri.eigenvalues()(static_cast<Eigen::Index>(i));
    pair.vec.assign(n, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      axpy(tri.eigenvectors()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)), basis[j], pair.vec);
    }
    const double nv = norm(pair.vec);
    if (nv <= 1e-12) continue;
    for (auto& x : pair.vec) x /= nv;
    out.push_back(std::move(pair));
  }
  return out;
}

// Deflated restarted Lanczos. A single Krylov sequence finds one copy of each
// eigenvalue, so degenerate multiplicities (identical components, leaf
// symmetries) need restarts in the orthogonal complement of everything found
// so far; the loop stops once the complement's smallest eigenvalue certifies
// that the collected s smallest are complete.
StructuralEncoding lanczos_eigvecs(const NormalizedAdjacency& a, std::size_t s, const SpectralOptions& opts,
                                   std::size_t n_components, const std::vector<std::size_t>& comp) {
  const std::size_t n = a.n;
  const std::size_t max_iter = std::max<std::size_t>(
      2 * s + 16,
      static_cast<std::size_t>(std::ceil(10.0 * static_cast<double>(s) * std::log(std::max<double>(n, 2.0)))));
  std::size_t budget = max_iter;

  std::vector<std::vector<double>> deflation = kernel_basis(a, n_components, comp);
  const std::size_t kernel_size = deflation.size();
  std::vector<RitzPair> collected;
  RngStream rng(opts.seed);

  bool certified = false;
  while (!certified) {
    const std::size_t missing = collected.size() < s ? s - collected.size() : 1;
    std::vector<RitzPair> found = lanczos_sequence(a, deflation, missing, opts.tolerance, rng, &budget);
    if (found.empty()) {
      // Complement exhausted (or no budget): accept what we have if enough.
      if (collected.size() >= s && deflation.size() - kernel_size + n_components >= n) break;
      if (budget == 0) {
        throw NumericError("Lanczos did not converge within " + std::to_string(max_iter) + " iterations");
      }
      break;
    }
    if (collected.size() >= s) {
      // Verification restart: nothing below the current cut may hide in the
      // complement once its smallest eigenvalue clears the cut.
      if (found.front().lambda >= collected[s - 1].lambda - 1e-7) {
        certified = true;
      }
    }
    for (auto& p : found) {
      deflation.push_back(p.vec);
      collected.push_back(std::move(p));
    }
    std::sort(collected.begin(), collected.end(),
              [](const RitzPair& x, const RitzPair& y) { return x.lambda < y.lambda; });
    if (!certified && budget == 0) {
      if (collected.size() < s) {
        throw NumericError("Lanczos did not converge within " + std::to_string(max_iter) + " iterations");
      }
      break;  // accept uncertified: the budget is the spec'd cap
    }
  }

  std::vector<const RitzPair*> nontrivial;
  for (const auto& p : collected) {
    if (p.lambda > kTrivialEigenvalueThreshold) nontrivial.push_back(&p);
  }
  if (nontrivial.size() < s) {
    throw ValidationError("requested " + std::to_string(s) + " non-trivial eigenvalues but only " +
                          std::to_string(nontrivial.size()) + " converged");
  }
  StructuralEncoding enc;
  enc.s = s;
  enc.u = DenseMatrix(n, s);
  for (std::size_t c = 0; c < s; ++c) {
    enc.eigenvalues.push_back(nontrivial[c]->lambda);
    for (std::size_t r = 0; r < n; ++r) enc.u.at(r, c) = nontrivial[c]->vec[r];
  }
  return enc;
}

}  // namespace

StructuralEncoding laplacian_eigvecs(const NormalizedAdjacency& a, std::size_t s, const SpectralOptions& opts) {
  std::vector<std::size_t> comp;
  const std::size_t n_components = connected_components(a, &comp);
  if (s < 1) throw ValidationError("encoding dimension must be at least 1");
  if (s > a.n - n_components) {
    throw ValidationError("requested " + std::to_string(s) + " non-trivial eigenvalues but the spectrum has only " +
                          std::to_string(a.n - n_components));
  }

  StructuralEncoding enc = a.n <= opts.dense_threshold ? dense_eigvecs(a, s)
                                                       : lanczos_eigvecs(a, s, opts, n_components, comp);
  for (std::size_t c = 0; c < s; ++c) {
    std::vector<double> col(a.n);
    for (std::size_t r = 0; r < a.n; ++r) col[r] = enc.u.at(r, c);
    fix_column_sign(col.data(), a.n);
    for (std::size_t r = 0; r < a.n; ++r) enc.u.at(r, c) = col[r];
  }
  return enc;
}

DenseMatrix concat_features(const DenseMatrix& x, const StructuralEncoding& enc) {
  if (enc.s == 0) return x;
  if (x.rows != enc.u.rows) {
    throw ValidationError("concat_features: row mismatch, features " + std::to_string(x.rows) + " vs encoding " +
                          std::to_string(enc.u.rows));
  }
  DenseMatrix out(x.rows, x.cols + enc.s);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::copy(x.row(r).begin(), x.row(r).end(), out.row(r).begin());
    std::copy(enc.u.row(r).begin(), enc.u.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(x.cols));
  }
  return out;
}

void save_encoding(const StructuralEncoding& enc, const std::string& path) {
  std::vector<std::uint8_t> out;
  put_u32(out, kEncodingMagic);
  put_u32(out, kEncodingVersion);
  put_u64(out, enc.u.rows);
  put_u64(out, enc.s);
  const std::size_t payload_start = out.size();
  for (double v : enc.eigenvalues) put_f64(out, v);
  const auto* up = reinterpret_cast<const std::uint8_t*>(enc.u.data.data());
  out.insert(out.end(), up, up + enc.u.data.size() * sizeof(double));
  put_u64(out, fnv1a64(out.data() + payload_start, out.size() - payload_start));
  write_file(path, out);
}

StructuralEncoding load_encoding(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size());
  if (r.remaining() < 8 || r.u32() != kEncodingMagic) throw ValidationError(path + ": not an encoding cache");
  const std::uint32_t version = r.u32();
  if (version != kEncodingVersion) {
    throw ValidationError(path + ": unsupported encoding cache version " + std::to_string(version));
  }
  StructuralEncoding enc;
  const std::size_t n = r.u64();
  enc.s = r.u64();
  const std::size_t payload_start = r.pos();
  enc.eigenvalues.resize(enc.s);
  for (auto& v : enc.eigenvalues) v = r.f64();
  enc.u = DenseMatrix(n, enc.s);
  r.bytes(enc.u.data.data(), n * enc.s * sizeof(double));
  const std::size_t payload_end = r.pos();
  const std::uint64_t stored = r.u64();
  const std::uint64_t actual = fnv1a64(bytes.data() + payload_start, payload_end - payload_start);
  if (stored != actual) throw IoError(path + ": encoding cache checksum mismatch");
  return enc;
}

}  // namespace hopformer
