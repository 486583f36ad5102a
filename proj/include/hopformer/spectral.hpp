// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "hopformer/graph.hpp"

namespace hopformer {

/// Eigenvectors of L = I - A_hat for the s smallest non-trivial eigenvalues.
/// Columns are unit-norm with a deterministic sign (first entry above 1e-8 in
/// magnitude is positive). Eigenvalues are ascending.
struct StructuralEncoding {
  DenseMatrix u;  // n x s
  std::vector<double> eigenvalues;
  std::size_t s = 0;

  static StructuralEncoding none(std::size_t n) {
    StructuralEncoding e;
    e.u = DenseMatrix(n, 0);
    return e;
  }
};

struct SpectralOptions {
  std::size_t dense_threshold = 2000;  // dense eigensolver up to this n
  double tolerance = 1e-8;             // Lanczos Ritz-residual tolerance
  std::uint64_t seed = 0x5eed;         // Lanczos start vector
};

/// Trivial-eigenvalue cutoff: eigenvalues at or below this are the per-component
/// kernel of L and are excluded from the encoding.
constexpr double kTrivialEigenvalueThreshold = 1e-8;

/// Computes the structural encoding. Requires 1 <= s <= n - (#components).
/// Dense symmetric eigendecomposition below the threshold; Lanczos with full
/// reorthogonalization and explicit deflation of the known kernel above it.
StructuralEncoding laplacian_eigvecs(const NormalizedAdjacency& a, std::size_t s,
                                     const SpectralOptions& opts = {});

/// X' = X || U. s = 0 returns a copy of x.
DenseMatrix concat_features(const DenseMatrix& x, const StructuralEncoding& enc);

void save_encoding(const StructuralEncoding& enc, const std::string& path);
StructuralEncoding load_encoding(const std::string& path);

}  // namespace hopformer
