// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hopformer/augment.hpp"
#include "hopformer/checkpoint.hpp"
#include "hopformer/model.hpp"
#include "hopformer/tokens.hpp"

namespace hopformer {

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Splits {
  std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle split with largest-remainder rounding; leftover seats go to
/// still-empty sets first so no set starves when n >= 3. Throws if any set
/// ends up empty.
Splits split_nodes(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct TrainConfig {
  std::size_t batch_size = 2000;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t epochs_max = 1000;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  SplitFractions split;
  std::string train_index_file, val_index_file, test_index_file;  // override fractions when set
  ModelConfig model;  // hops/token_dim/num_classes filled from data when zero
  AugConfig aug;
  std::size_t token_resident_bytes = std::size_t{1} << 30;
  std::string checkpoint_path;
  std::string results_path;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct Metrics {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t peak_rss_kb = 0;
  std::size_t aug_invocations = 0;  // augmentation runs only on training batches
};

struct TrainResult {
  Metrics metrics;
  Checkpoint best;  // parameters at the best-validation epoch
};

/// Mini-batch training with early stopping on validation accuracy. Metrics
/// records are written to `log` (one "epoch split value" line each) when
/// provided. Throws NumericError when the loss turns NaN.
TrainResult train(const TokenStore& tokens, const std::vector<std::int64_t>& labels, std::size_t num_classes,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

/// Accuracy of argmax(logits) over the given nodes (evaluation mode: no
/// dropout, no augmentation). Unlabeled nodes are rejected.
double evaluate(const NetworkT<float>& net, const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                std::span<const std::size_t> index_set, std::size_t batch_size = 2000);

double evaluate(const Checkpoint& ckpt, const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                std::span<const std::size_t> index_set, std::size_t batch_size = 2000);

/// Direct hop-weighted aggregation: Z = sum_k betas[k] * H_k with
/// H_0 = x and H_k = A_hat H_{k-1}. The graph-domain counterpart of
/// fixed_attention_forward.
DenseMatrix decoupled_gcn_oracle(const NormalizedAdjacency& a, const DenseMatrix& x, std::span<const double> betas);

std::vector<std::size_t> load_index_file(const std::string& path, std::size_t n);

}  // namespace hopformer
