// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hopformer/graph.hpp"

namespace hopformer {

/// Per-node hop-token sequences: data[v][k][:] is the k-step propagated
/// feature row (A_hat^k X')[v]. Hop 0 is the input feature matrix itself.
struct TokenTensor {
  std::size_t n = 0;
  std::size_t hops = 0;       // K; the tensor holds K + 1 slices per node
  std::size_t token_dim = 0;  // d'
  std::vector<double> data;   // node-major: n x (K+1) x d'

  double& at(std::size_t v, std::size_t k, std::size_t c) { return data[(v * (hops + 1) + k) * token_dim + c]; }
  double at(std::size_t v, std::size_t k, std::size_t c) const { return data[(v * (hops + 1) + k) * token_dim + c]; }
  std::span<const double> token(std::size_t v, std::size_t k) const {
    return {data.data() + (v * (hops + 1) + k) * token_dim, token_dim};
  }
};

/// Iterated propagation: writes hop k, then advances X <- A_hat X, for
/// k = 0..K. Exactly K spmm applications; working memory beyond the output is
/// two n x d' ping-pong buffers.
TokenTensor hop_tokens(const NormalizedAdjacency& a, const DenseMatrix& x_prime, std::size_t hops);

enum class TokenDType : std::uint32_t { F32 = 0, F64 = 1 };

/// Cache layout is hop-major on disk ((K+1) blocks of n x d') with a checksum
/// trailer; loading returns the node-major tensor.
void save_tokens(const TokenTensor& t, const std::string& path, TokenDType dtype = TokenDType::F32);
TokenTensor load_tokens(const std::string& path);

struct TokenCacheInfo {
  std::size_t n = 0;
  std::size_t hops = 0;
  std::size_t token_dim = 0;
  TokenDType dtype = TokenDType::F32;
};

TokenCacheInfo peek_tokens(const std::string& path);

/// Trainer-facing view of a token cache: float rows, gathered per mini-batch.
/// Small caches are held resident; larger ones are streamed from disk so that
/// training memory stays bounded by the batch size.
class TokenStore {
 public:
  /// Opens a cache; resident when the payload is at most resident_bytes.
  static TokenStore open(const std::string& path, std::size_t resident_bytes = std::size_t{1} << 30);
  /// Wraps an in-memory tensor (always resident).
  static TokenStore from_tensor(const TokenTensor& t);

  std::size_t n() const { return info_.n; }
  std::size_t hops() const { return info_.hops; }
  std::size_t token_dim() const { return info_.token_dim; }
  std::size_t row_size() const { return (info_.hops + 1) * info_.token_dim; }
  bool streamed() const { return file_ != nullptr; }

  /// Gathers the token sequences for the given nodes into out (row-major
  /// b x (K+1) x d'). out is resized.
  void gather(std::span<const std::size_t> nodes, std::vector<float>& out) const;

 private:
  TokenCacheInfo info_;
  std::vector<float> resident_;  // node-major when non-empty
  struct FileCloser {
    void operator()(std::FILE* f) const {
      if (f) std::fclose(f);
    }
  };
  std::shared_ptr<std::FILE> file_;
  std::size_t payload_offset_ = 0;
};

}  // namespace hopformer
