// SPDX-License-Identifier: Apache-2.0
#include "hopformer/train.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace hopformer {

namespace {

std::size_t peak_rss_kb() {
  struct rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<std::size_t>(usage.ru_maxrss);
}

BatchT<float> gather_batch(const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                           std::size_t num_classes, std::span<const std::size_t> nodes) {
  BatchT<float> batch;
  batch.b = nodes.size();
  batch.hops = tokens.hops();
  batch.token_dim = tokens.token_dim();
  batch.num_classes = num_classes;
  batch.node_ids.assign(nodes.begin(), nodes.end());
  tokens.gather(nodes, batch.tokens);
  batch.labels.assign(batch.b * num_classes, 0.0f);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::int64_t l = labels[nodes[i]];
    if (l == kUnlabeled) {
      throw ValidationError("batch contains unlabeled node " + std::to_string(nodes[i]));
    }
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw ValidationError("label " + std::to_string(l) + " out of range for " + std::to_string(num_classes) +
                            " classes");
    }
    batch.labels[i * num_classes + static_cast<std::size_t>(l)] = 1.0f;
  }
  return batch;
}

double accuracy_of(const NetworkT<float>& net, const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                   std::span<const std::size_t> index_set, std::size_t batch_size) {
  if (index_set.empty()) throw ValidationError("evaluate: empty index set");
  NoGradGuard no_grad;
  RngStream unused(0);
  const std::size_t c = net.config().num_classes;
  std::size_t correct = 0;
  std::vector<float> gathered;
  for (std::size_t off = 0; off < index_set.size(); off += batch_size) {
    const std::size_t b = std::min(batch_size, index_set.size() - off);
    const auto nodes = index_set.subspan(off, b);
    for (std::size_t node : nodes) {
      if (node >= labels.size()) throw ValidationError("evaluate: node id " + std::to_string(node) + " out of range");
      if (labels[node] == kUnlabeled) {
        throw ValidationError("evaluate: node " + std::to_string(node) + " is unlabeled");
      }
    }
    tokens.gather(nodes, gathered);
    TensorT<float> in = TensorT<float>::from({b, tokens.hops() + 1, tokens.token_dim()}, gathered);
    TensorT<float> logits = net.forward(in, /*train=*/false, unused);
    const auto& v = logits.values();
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < c; ++j) {
        if (v[i * c + j] > v[i * c + arg]) arg = j;
      }
      if (static_cast<std::int64_t>(arg) == labels[nodes[i]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(index_set.size());
}

std::vector<std::size_t> labeled_only(std::span<const std::size_t> nodes, const std::vector<std::int64_t>& labels) {
  std::vector<std::size_t> out;
  out.reserve(nodes.size());
  for (std::size_t v : nodes) {
    if (labels[v] != kUnlabeled) out.push_back(v);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs_max < 1) throw ValidationError("epochs_max must be at least 1");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (lr < 0.0) throw ValidationError("lr must be non-negative");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
  const bool any_file = !train_index_file.empty() || !val_index_file.empty() || !test_index_file.empty();
  const bool all_files = !train_index_file.empty() && !val_index_file.empty() && !test_index_file.empty();
  if (any_file && !all_files) {
    throw ValidationError("split: either give all three index files or none");
  }
  if (!any_file) {
    const double sum = split.train + split.val + split.test;
    if (split.train <= 0.0 || split.val <= 0.0 || split.test <= 0.0 || std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("split fractions must be positive and sum to 1");
    }
  }
  if (aug.enabled) aug.validate();
}

Splits split_nodes(std::size_t n, const SplitFractions& fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (fractions.train <= 0.0 || fractions.val <= 0.0 || fractions.test <= 0.0 || std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be positive and sum to 1");
  }
  const double quota[3] = {fractions.train * static_cast<double>(n), fractions.val * static_cast<double>(n),
                           fractions.test * static_cast<double>(n)};
  std::size_t size[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    size[i] = static_cast<std::size_t>(std::floor(quota[i]));
    frac[i] = quota[i] - std::floor(quota[i]);
    assigned += size[i];
  }
  // Largest-remainder seats, empty sets served first.
  for (std::size_t seat = assigned; seat < n; ++seat) {
    int pick = -1;
    for (int i = 0; i < 3; ++i) {
      if (size[i] != 0) continue;
      if (pick < 0 || frac[i] > frac[pick]) pick = i;
    }
    if (pick < 0) {
      for (int i = 0; i < 3; ++i) {
        if (pick < 0 || frac[i] > frac[pick]) pick = i;
      }
    }
    size[pick] += 1;
    frac[pick] -= 1.0;
  }
  if (size[0] == 0 || size[1] == 0 || size[2] == 0) {
    throw ValidationError("split produced an empty set (n = " + std::to_string(n) + ")");
  }

  RngStream rng(seed);
  std::vector<std::size_t> order = rng.permutation(n);
  Splits s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size[0]));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(size[0]),
               order.begin() + static_cast<std::ptrdiff_t>(size[0] + size[1]));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(size[0] + size[1]), order.end());
  return s;
}

std::vector<std::size_t> load_index_file(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file: " + path);
  std::vector<std::size_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::size_t v;
    std::string rest;
    if (!(is >> v) || (is >> rest)) {
      throw ValidationError(path + ": malformed index at line " + std::to_string(lineno));
    }
    if (v >= n) throw ValidationError(path + ": node id " + std::to_string(v) + " out of range");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(path + ": empty index file");
  return out;
}

TrainResult train(const TokenStore& tokens, const std::vector<std::int64_t>& labels, std::size_t num_classes,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (labels.size() != tokens.n()) {
    throw ValidationError("train: label count " + std::to_string(labels.size()) + " != token-cache node count " +
                          std::to_string(tokens.n()));
  }
  if (num_classes < 2) throw ValidationError("train: need at least 2 classes");

  ModelConfig model_cfg = cfg.model;
  model_cfg.hops = tokens.hops();
  model_cfg.token_dim = tokens.token_dim();
  model_cfg.num_classes = num_classes;
  model_cfg.validate();

  Splits splits;
  if (!cfg.train_index_file.empty()) {
    splits.train = load_index_file(cfg.train_index_file, tokens.n());
    splits.val = load_index_file(cfg.val_index_file, tokens.n());
    splits.test = load_index_file(cfg.test_index_file, tokens.n());
  } else {
    splits = split_nodes(tokens.n(), cfg.split, cfg.seed);
  }
  // Loss and accuracy are defined on labeled nodes only.
  std::vector<std::size_t> train_nodes = labeled_only(splits.train, labels);
  std::vector<std::size_t> val_nodes = labeled_only(splits.val, labels);
  std::vector<std::size_t> test_nodes = labeled_only(splits.test, labels);
  if (train_nodes.empty()) throw ValidationError("train: empty labeled set in the train split");
  if (val_nodes.empty()) throw ValidationError("train: empty labeled set in the val split");
  if (test_nodes.empty()) throw ValidationError("train: empty labeled set in the test split");

  RngStream master(cfg.seed);
  NetworkT<float> net = NetworkT<float>::init(model_cfg, master.split(1).next_u64());
  RngStream shuffle_rng = master.split(2);
  RngStream aug_rng = master.split(3);
  RngStream dropout_rng = master.split(4);

  AdamW<float> opt(net.params().tensors(),
                   {.lr = cfg.lr, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = cfg.weight_decay});
  Augmenter<float> augmenter(cfg.aug);

  TrainResult result;
  result.metrics.best_val_accuracy = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Seeded shuffle, then fixed-size chunks.
    const std::vector<std::size_t> perm = shuffle_rng.permutation(train_nodes.size());
    std::vector<std::size_t> order(train_nodes.size());
    for (std::size_t i = 0; i < perm.size(); ++i) order[i] = train_nodes[perm[i]];

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - off);
      BatchT<float> batch = gather_batch(tokens, labels, num_classes, {order.data() + off, b});
      if (cfg.aug.enabled) batch = augmenter.apply(batch, aug_rng);

      TensorT<float> in = TensorT<float>::from({batch.b, batch.hops + 1, batch.token_dim}, batch.tokens);
      TensorT<float> y = TensorT<float>::from({batch.b, num_classes}, batch.labels);
      TensorT<float> logits = net.forward(in, /*train=*/true, dropout_rng);
      TensorT<float> loss = cross_entropy_soft(logits, y);
      const double loss_val = static_cast<double>(loss.item());
      if (std::isnan(loss_val)) {
        throw NumericError("loss is NaN at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1));
      }
      loss_sum += loss_val;
      ++batches;
      loss.backward();
      opt.step();
      opt.zero_grad();
    }

    const double val_acc = accuracy_of(net, tokens, labels, val_nodes, cfg.batch_size);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochRecord rec{epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)), val_acc, seconds};
    result.metrics.epochs.push_back(rec);
    if (log) {
      (*log) << epoch << " train " << rec.train_loss << "\n" << epoch << " val " << rec.val_accuracy << "\n";
    }

    if (val_acc > result.metrics.best_val_accuracy) {
      result.metrics.best_val_accuracy = val_acc;
      result.metrics.best_epoch = epoch;
      result.best = make_checkpoint(model_cfg, net.params());
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }

  NetworkT<float> best_net = network_from_checkpoint<float>(result.best);
  result.metrics.test_accuracy = accuracy_of(best_net, tokens, labels, test_nodes, cfg.batch_size);
  result.metrics.peak_rss_kb = peak_rss_kb();
  result.metrics.aug_invocations = augmenter.invocations();
  if (log) {
    (*log) << result.metrics.best_epoch << " test " << result.metrics.test_accuracy << "\n";
  }
  return result;
}

double evaluate(const NetworkT<float>& net, const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                std::span<const std::size_t> index_set, std::size_t batch_size) {
  return accuracy_of(net, tokens, labels, index_set, batch_size);
}

double evaluate(const Checkpoint& ckpt, const TokenStore& tokens, const std::vector<std::int64_t>& labels,
                std::span<const std::size_t> index_set, std::size_t batch_size) {
  NetworkT<float> net = network_from_checkpoint<float>(ckpt);
  return accuracy_of(net, tokens, labels, index_set, batch_size);
}

DenseMatrix decoupled_gcn_oracle(const NormalizedAdjacency& a, const DenseMatrix& x, std::span<const double> betas) {
  if (x.rows != a.n) {
    throw ValidationError("decoupled_gcn_oracle: feature rows " + std::to_string(x.rows) + " != node count " +
                          std::to_string(a.n));
  }
  if (betas.empty()) throw ValidationError("decoupled_gcn_oracle: need at least one hop weight");
  DenseMatrix z(x.rows, x.cols);
  DenseMatrix h = x;
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (k > 0) h = spmm(a, h);
    const double bk = betas[k];
    for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += bk * h.data[i];
  }
  return z;
}

}  // namespace hopformer
