// SPDX-License-Identifier: Apache-2.0
#include "hopformer/model.hpp"

namespace hopformer {

DenseMatrix fixed_attention_forward(const TokenTensor& tokens, std::span<const double> betas) {
  const std::size_t t = tokens.hops + 1;
  if (betas.size() != t) {
    throw ValidationError("fixed_attention_forward: expected " + std::to_string(t) + " hop weights, got " +
                          std::to_string(betas.size()));
  }
  const std::size_t d = tokens.token_dim;

  // Single-row attention matrix: every row zero except the last, which holds
  // the hop weights.
  std::vector<double> attn(t * t, 0.0);
  for (std::size_t k = 0; k < t; ++k) attn[(t - 1) * t + k] = betas[k];

  DenseMatrix out(tokens.n, d);
  std::vector<double> mixed(t * d);
  for (std::size_t v = 0; v < tokens.n; ++v) {
    std::fill(mixed.begin(), mixed.end(), 0.0);
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t k = 0; k < t; ++k) {
        const double w = attn[r * t + k];
        if (w == 0.0) continue;
        const auto token = tokens.token(v, k);
        for (std::size_t c = 0; c < d; ++c) mixed[r * d + c] += w * token[c];
      }
    }
    // Summation readout over the token axis.
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < d; ++c) out.at(v, c) += mixed[r * d + c];
    }
  }
  return out;
}

}  // namespace hopformer
