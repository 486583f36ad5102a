// SPDX-License-Identifier: Apache-2.0
//
// Batch-level augmentation of hop-token sequences: a mixup-style convex
// combination of node pairs (with interpolated soft labels), followed by
// zeroing a fixed fraction of hop tokens per node.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hopformer/common.hpp"
#include "hopformer/rng.hpp"

namespace hopformer {

struct AugConfig {
  bool enabled = false;
  double p_aug = 0.5;   // probability an augmented batch is produced
  double tau = 0.5;     // hop-mask ratio
  double alpha = 1.0;   // beta-distribution shape for the mixing weight
  double beta = 1.0;
  bool protect_hop0 = false;  // keep hop 0 out of the mask draw

  void validate() const {
    if (p_aug < 0.0 || p_aug > 1.0) throw ValidationError("aug.p_aug must be in [0, 1]");
    if (tau <= 0.0 || tau >= 1.0) throw ValidationError("aug.tau must be in (0, 1)");
    if (alpha <= 0.0 || beta <= 0.0) throw ValidationError("aug.alpha and aug.beta must be positive");
  }
};

/// A mini-batch of token sequences with soft label rows.
template <class S>
struct BatchT {
  std::size_t b = 0;
  std::size_t hops = 0;       // K
  std::size_t token_dim = 0;  // d'
  std::size_t num_classes = 0;
  std::vector<S> tokens;  // b x (K+1) x d'
  std::vector<S> labels;  // b x c, rows sum to 1
  std::vector<std::size_t> node_ids;

  std::size_t row_size() const { return (hops + 1) * token_dim; }
  S* token_row(std::size_t i) { return tokens.data() + i * row_size(); }
  const S* token_row(std::size_t i) const { return tokens.data() + i * row_size(); }

  void validate() const {
    if (b < 1) throw ValidationError("batch: must contain at least one node");
    if (tokens.size() != b * row_size()) throw ValidationError("batch: token buffer size mismatch");
    if (labels.size() != b * num_classes) throw ValidationError("batch: label buffer size mismatch");
    for (std::size_t i = 0; i < b; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < num_classes; ++j) sum += static_cast<double>(labels[i * num_classes + j]);
      if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError("batch: label row " + std::to_string(i) + " sums to " + std::to_string(sum));
      }
    }
  }
};

/// Number of hop slices the mask zeroes per node.
inline std::size_t masked_hop_count(std::size_t hops, double tau) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(hops + 1) * tau)));
}

/// Global mixing: out_i = lambda * in_i + (1 - lambda) * in_{pairing[i]} for
/// tokens and labels alike. One lambda for the whole batch; pairing must be a
/// permutation (a node may draw itself).
template <class S>
BatchT<S> mix_batch(const BatchT<S>& batch, double lambda, std::span<const std::size_t> pairing) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw ValidationError("mix_batch: lambda must be in [0, 1], got " + std::to_string(lambda));
  }
  if (pairing.size() != batch.b) throw ValidationError("mix_batch: pairing size != batch size");
  {
    std::vector<bool> seen(batch.b, false);
    for (std::size_t j : pairing) {
      if (j >= batch.b || seen[j]) throw ValidationError("mix_batch: pairing is not a permutation");
      seen[j] = true;
    }
  }
  BatchT<S> out = batch;
  const S lam = static_cast<S>(lambda);
  const S com = static_cast<S>(1.0 - lambda);
  const std::size_t row = batch.row_size();
  for (std::size_t i = 0; i < batch.b; ++i) {
    const S* self = batch.token_row(i);
    const S* partner = batch.token_row(pairing[i]);
    S* dst = out.token_row(i);
    for (std::size_t c = 0; c < row; ++c) dst[c] = lam * self[c] + com * partner[c];
    const S* ls = batch.labels.data() + i * batch.num_classes;
    const S* lp = batch.labels.data() + pairing[i] * batch.num_classes;
    S* ld = out.labels.data() + i * batch.num_classes;
    for (std::size_t c = 0; c < batch.num_classes; ++c) ld[c] = lam * ls[c] + com * lp[c];
  }
  return out;
}

/// Local masking: zeroes max(1, floor((K+1) * tau)) whole hop slices per node,
/// positions drawn independently per node. Labels are untouched.
template <class S>
BatchT<S> mask_hops(const BatchT<S>& batch, double tau, RngStream& rng, bool protect_hop0 = false) {
  if (tau <= 0.0 || tau >= 1.0) {
    throw ValidationError("mask_hops: tau must be in (0, 1), got " + std::to_string(tau));
  }
  BatchT<S> out = batch;
  const std::size_t t = batch.hops + 1;
  std::vector<std::size_t> candidates;
  candidates.reserve(t);
  for (std::size_t k = protect_hop0 ? 1 : 0; k < t; ++k) candidates.push_back(k);
  const std::size_t want = masked_hop_count(batch.hops, tau);
  const std::size_t m = std::min(want, candidates.size());
  std::vector<std::size_t> pool = candidates;
  for (std::size_t i = 0; i < batch.b; ++i) {
    // Partial Fisher-Yates: the first m entries become this node's mask.
    for (std::size_t j = 0; j < m; ++j) {
      std::swap(pool[j], pool[j + rng.below(pool.size() - j)]);
    }
    S* row = out.token_row(i);
    for (std::size_t j = 0; j < m; ++j) {
      std::fill_n(row + pool[j] * batch.token_dim, batch.token_dim, S(0));
    }
  }
  return out;
}

/// Gated composition: with probability 1 - p_aug the batch passes through
/// unchanged; otherwise one mixing weight is drawn, every node is paired and
/// mixed, and the mixed sequences are masked.
template <class S>
class Augmenter {
 public:
  explicit Augmenter(AugConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const AugConfig& config() const { return cfg_; }

  /// Count of apply() calls; evaluation paths must never advance this.
  std::size_t invocations() const { return calls_; }

  BatchT<S> apply(const BatchT<S>& batch, RngStream& rng) {
    ++calls_;
    batch.validate();
    if (rng.uniform() >= cfg_.p_aug) return batch;
    const double lambda = rng.beta(cfg_.alpha, cfg_.beta);
    const std::vector<std::size_t> pairing = rng.permutation(batch.b);
    BatchT<S> mixed = mix_batch(batch, lambda, pairing);
    return mask_hops(mixed, cfg_.tau, rng, cfg_.protect_hop0);
  }

 private:
  AugConfig cfg_;
  std::size_t calls_ = 0;
};

}  // namespace hopformer
