// SPDX-License-Identifier: Apache-2.0
#include "hopformer/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hopformer/config.hpp"
#include "hopformer/manifest.hpp"
#include "hopformer/reference.hpp"
#include "hopformer/spectral.hpp"
#include "hopformer/synthetic.hpp"
#include "hopformer/tokens.hpp"
#include "hopformer/train.hpp"

namespace hopformer {

namespace {

namespace fs = std::filesystem;

GraphFormat parse_format(const std::string& name) {
  if (name == "edge-list") return GraphFormat::EdgeList;
  if (name == "binary") return GraphFormat::Binary;
  throw ValidationError("unknown graph format '" + name + "' (expected edge-list or binary)");
}

struct PreprocessArgs {
  std::string graph_path;
  std::string format = "edge-list";
  std::int64_t hops = -1;
  std::int64_t se_dim = 3;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::uint64_t dense_threshold = 2000;
};

int cmd_preprocess(const PreprocessArgs& args) {
  if (args.hops < 0) throw ValidationError("--k must be non-negative");
  if (args.se_dim < 0) throw ValidationError("--se-dim must be non-negative");
  fs::create_directories(args.out_dir);

  const CsrGraph graph = load_graph(args.graph_path, parse_format(args.format));
  const NormalizedAdjacency adj = normalize(graph);

  StructuralEncoding enc = StructuralEncoding::none(graph.n);
  if (args.se_dim > 0) {
    SpectralOptions opts;
    opts.seed = args.seed;
    opts.dense_threshold = args.dense_threshold;
    enc = laplacian_eigvecs(adj, static_cast<std::size_t>(args.se_dim), opts);
  }
  const DenseMatrix x_prime = concat_features(graph.features, enc);
  if (x_prime.cols == 0) {
    throw ValidationError("graph has no features and the encoding is disabled; nothing to tokenize");
  }
  const TokenTensor tokens = hop_tokens(adj, x_prime, static_cast<std::size_t>(args.hops));

  const std::string token_path = (fs::path(args.out_dir) / "tokens.bin").string();
  save_tokens(tokens, token_path);
  std::vector<ManifestEntry> outputs{{token_path, hash_file(token_path)}};
  if (args.se_dim > 0) {
    const std::string enc_path = (fs::path(args.out_dir) / "encoding.bin").string();
    save_encoding(enc, enc_path);
    outputs.push_back({enc_path, hash_file(enc_path)});
  }

  nlohmann::json cfg;
  cfg["graph"] = args.graph_path;
  cfg["format"] = args.format;
  cfg["k"] = args.hops;
  cfg["se_dim"] = args.se_dim;
  cfg["dense_threshold"] = args.dense_threshold;
  const std::string manifest_path = (fs::path(args.out_dir) / "manifest.json").string();
  write_manifest(manifest_path, "preprocess", args.seed, cfg, {{args.graph_path, hash_file(args.graph_path)}},
                 outputs);

  std::cout << "tokens: " << token_path << " (n=" << tokens.n << ", k=" << tokens.hops
            << ", dim=" << tokens.token_dim << ")\n";
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string graph_path;
  std::string format = "edge-list";
  std::string tokens_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // -1: keep config value
};

int cmd_train(const TrainArgs& args) {
  nlohmann::json flat = default_flat_config();
  if (!args.config_path.empty()) {
    const nlohmann::json file_cfg = load_config_file(args.config_path);
    for (const auto& [k, v] : file_cfg.items()) flat[k] = v;
  }
  for (const auto& o : args.overrides) apply_override(flat, o);
  if (args.seed >= 0) flat["seed"] = static_cast<std::uint64_t>(args.seed);
  TrainConfig cfg = train_config_from_flat(flat);

  fs::create_directories(args.out_dir);
  if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = (fs::path(args.out_dir) / "checkpoint.bin").string();
  if (cfg.results_path.empty()) cfg.results_path = (fs::path(args.out_dir) / "results.txt").string();

  const CsrGraph graph = load_graph(args.graph_path, parse_format(args.format));
  if (graph.num_classes < 2) throw ValidationError("graph has no usable labels (need at least 2 classes)");
  const TokenStore tokens = TokenStore::open(args.tokens_path, cfg.token_resident_bytes);
  if (tokens.n() != graph.n) {
    throw ValidationError("token cache has " + std::to_string(tokens.n()) + " nodes but graph has " +
                          std::to_string(graph.n));
  }

  std::ofstream results(cfg.results_path);
  if (!results) throw IoError("cannot write results file: " + cfg.results_path);
  struct Tee : std::ostream, std::streambuf {
    std::ostream& a;
    std::ostream& b;
    Tee(std::ostream& a_, std::ostream& b_) : std::ostream(this), a(a_), b(b_) {}
    int overflow(int c) override {
      if (c != EOF) {
        a.put(static_cast<char>(c));
        b.put(static_cast<char>(c));
      }
      return c;
    }
  } tee(std::cout, results);

  const TrainResult result = train(tokens, graph.labels, graph.num_classes, cfg, &tee);
  save_checkpoint(result.best, cfg.checkpoint_path);

  const std::string manifest_path = (fs::path(args.out_dir) / "manifest.json").string();
  write_manifest(manifest_path, "train", cfg.seed, flat,
                 {{args.graph_path, hash_file(args.graph_path)}, {args.tokens_path, hash_file(args.tokens_path)}},
                 {{cfg.checkpoint_path, hash_file(cfg.checkpoint_path)}, {cfg.results_path, hash_file(cfg.results_path)}});

  std::cout << "best_epoch " << result.metrics.best_epoch << "\n"
            << "best_val_accuracy " << result.metrics.best_val_accuracy << "\n"
            << "test_accuracy " << result.metrics.test_accuracy << "\n"
            << "peak_rss_kb " << result.metrics.peak_rss_kb << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint_path;
  std::string tokens_path;
  std::string graph_path;
  std::string format = "edge-list";
  std::string config_path;
  std::string split = "test";
  std::string indices_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

int cmd_eval(const EvalArgs& args) {
  nlohmann::json flat = default_flat_config();
  if (!args.config_path.empty()) {
    const nlohmann::json file_cfg = load_config_file(args.config_path);
    for (const auto& [k, v] : file_cfg.items()) flat[k] = v;
  }
  for (const auto& o : args.overrides) apply_override(flat, o);
  if (args.seed >= 0) flat["seed"] = static_cast<std::uint64_t>(args.seed);
  const TrainConfig cfg = train_config_from_flat(flat);

  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const CsrGraph graph = load_graph(args.graph_path, parse_format(args.format));
  const TokenStore tokens = TokenStore::open(args.tokens_path, cfg.token_resident_bytes);

  std::vector<std::size_t> index_set;
  if (!args.indices_path.empty()) {
    index_set = load_index_file(args.indices_path, tokens.n());
  } else {
    Splits splits = split_nodes(tokens.n(), cfg.split, cfg.seed);
    std::vector<std::size_t>* pick = nullptr;
    if (args.split == "train") pick = &splits.train;
    else if (args.split == "val") pick = &splits.val;
    else if (args.split == "test") pick = &splits.test;
    else throw ValidationError("--split must be train, val, or test");
    index_set = std::move(*pick);
    std::erase_if(index_set, [&](std::size_t v) { return graph.labels[v] == kUnlabeled; });
  }
  const double acc = evaluate(ckpt, tokens, graph.labels, index_set, cfg.batch_size);
  std::cout << "accuracy " << acc << " (" << index_set.size() << " nodes, split=" <<
      (args.indices_path.empty() ? args.split : args.indices_path) << ")\n";
  return 0;
}

struct OracleArgs {
  std::uint64_t trials = 50;
  std::uint64_t seed = 7;
};

int cmd_oracle_check(const OracleArgs& args) {
  RngStream rng(args.seed);
  bool ok = true;

  // Fixed-attention transformer vs direct hop-weighted aggregation.
  double fact_max = 0.0;
  for (std::uint64_t trial = 0; trial < args.trials; ++trial) {
    const std::size_t n = 2 + rng.below(31);   // <= 32
    const std::size_t hops = 1 + rng.below(4); // <= 4
    const std::size_t d = 1 + rng.below(8);    // <= 8
    CsrGraph g = erdos_renyi(n, 0.3, rng);
    const NormalizedAdjacency adj = normalize(g);
    const DenseMatrix x = random_features(n, d, rng);
    std::vector<double> betas(hops + 1);
    for (auto& b : betas) b = rng.uniform(-1.0, 1.0);
    const TokenTensor tokens = hop_tokens(adj, x, hops);
    const DenseMatrix via_attention = fixed_attention_forward(tokens, betas);
    const DenseMatrix via_graph = decoupled_gcn_oracle(adj, x, betas);
    fact_max = std::max(fact_max, max_rel_diff(via_attention, via_graph));
  }
  if (fact_max <= 1e-8) {
    std::cout << "PASS fixed-attention equivalence max_rel_err=" << fact_max << " (tol 1e-8, " << args.trials
              << " trials)\n";
  } else {
    std::cout << "FAIL fixed-attention equivalence max_rel_err=" << fact_max << " (tol 1e-8)\n";
    ok = false;
  }

  // Hop tokens vs dense matrix powers.
  double prop_max = 0.0;
  for (std::uint64_t trial = 0; trial < args.trials; ++trial) {
    const std::size_t n = 2 + rng.below(63);   // <= 64
    const std::size_t hops = 1 + rng.below(6); // <= 6
    const std::size_t d = 1 + rng.below(6);
    CsrGraph g = erdos_renyi(n, 0.2, rng);
    const NormalizedAdjacency adj = normalize(g);
    const DenseMatrix x = random_features(n, d, rng);
    const TokenTensor tokens = hop_tokens(adj, x, hops);
    for (std::size_t k = 0; k <= hops; ++k) {
      const DenseMatrix expect = dense_power_apply(adj, x, k);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t c = 0; c < d; ++c) {
          prop_max = std::max(prop_max, std::abs(tokens.at(v, k, c) - expect.at(v, c)));
        }
      }
    }
  }
  if (prop_max <= 1e-10) {
    std::cout << "PASS propagation oracle max_abs_err=" << prop_max << " (tol 1e-10, " << args.trials
              << " trials)\n";
  } else {
    std::cout << "FAIL propagation oracle max_abs_err=" << prop_max << " (tol 1e-10)\n";
    ok = false;
  }

  if (!ok) throw NumericError("oracle-check: tolerance violated");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"hop-token graph transformer for node classification"};
  app.require_subcommand(1);
  app.footer(config_key_help());

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "build the hop-token cache (and structural encoding) for a graph");
  p->add_option("--graph", pre.graph_path, "graph file")->required();
  p->add_option("--format", pre.format, "edge-list or binary")->default_str("edge-list");
  p->add_option("--k", pre.hops, "propagation hops K (tokens per node = K + 1)")->required();
  p->add_option("--se-dim", pre.se_dim, "structural encoding size s (0 disables)")->default_val(3);
  p->add_option("--out", pre.out_dir, "output directory")->required();
  p->add_option("--seed", pre.seed, "seed (eigensolver start vector)")->default_val(0);
  p->add_option("--dense-threshold", pre.dense_threshold, "dense eigensolver up to this node count")
      ->default_val(2000);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train on a token cache; labels come from the graph file");
  t->add_option("--config", tr.config_path, "flat JSON config file");
  t->add_option("--graph", tr.graph_path, "graph file (labels)")->required();
  t->add_option("--format", tr.format, "edge-list or binary")->default_str("edge-list");
  t->add_option("--tokens", tr.tokens_path, "token cache from preprocess")->required();
  t->add_option("--out", tr.out_dir, "output directory")->default_str(".");
  t->add_option("--set", tr.overrides, "override a config key, e.g. --set aug.p_aug=0.75");
  t->add_option("--seed", tr.seed, "override the config seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint_path, "checkpoint file")->required();
  e->add_option("--tokens", ev.tokens_path, "token cache")->required();
  e->add_option("--graph", ev.graph_path, "graph file (labels)")->required();
  e->add_option("--format", ev.format, "edge-list or binary")->default_str("edge-list");
  e->add_option("--config", ev.config_path, "flat JSON config (split seed/fractions)");
  e->add_option("--split", ev.split, "train, val, or test")->default_str("test");
  e->add_option("--indices", ev.indices_path, "explicit index file instead of a split");
  e->add_option("--set", ev.overrides, "override a config key");
  e->add_option("--seed", ev.seed, "override the config seed");

  OracleArgs oc;
  auto* o = app.add_subcommand("oracle-check",
                               "verify the fixed-attention equivalence and the propagation oracle");
  o->add_option("--trials", oc.trials, "random trials per suite")->default_val(50);
  o->add_option("--seed", oc.seed, "suite seed")->default_val(7);

  try {
    app.parse(argc, argv);
    if (p->parsed()) return cmd_preprocess(pre);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (o->parsed()) return cmd_oracle_check(oc);
    return 1;
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const NumericError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 2;
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace hopformer
