// SPDX-License-Identifier: Apache-2.0
//
// The hop-token transformer. Each node arrives as a sequence of K+1 hop
// tokens; a linear projection lifts them to the hidden width, L pre-LN
// encoder layers mix them along the hop axis (never across nodes), a learned
// readout weights hops 1..K against hop 0, and a two-layer MLP emits class
// logits.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hopformer/optim.hpp"
#include "hopformer/tensor.hpp"
#include "hopformer/tokens.hpp"

namespace hopformer {

struct ModelConfig {
  std::size_t hops = 0;        // K; tokens per node = K + 1
  std::size_t token_dim = 0;   // d' (features, plus encoding columns if any)
  std::size_t hidden_dim = 128;
  std::size_t layers = 1;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 0;  // 0 means 2 * hidden_dim
  std::size_t mlp_hidden = 128;
  std::size_t num_classes = 0;
  double dropout = 0.1;
  bool include_hop0_logit = false;  // admit hop 0 into the readout softmax

  std::size_t ffn_width() const { return ffn_hidden == 0 ? 2 * hidden_dim : ffn_hidden; }

  void validate() const {
    if (hops < 1) throw ValidationError("model: hops must be at least 1 (the readout needs a non-zero hop)");
    if (token_dim < 1) throw ValidationError("model: token_dim must be positive");
    if (layers < 1) throw ValidationError("model: layers must be at least 1");
    if (heads < 1 || hidden_dim % heads != 0) {
      throw ValidationError("model: hidden_dim (" + std::to_string(hidden_dim) + ") must be divisible by heads (" +
                            std::to_string(heads) + ")");
    }
    if (mlp_hidden < 1) throw ValidationError("model: mlp_hidden must be positive");
    if (num_classes < 1) throw ValidationError("model: num_classes must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("model: dropout must be in [0, 1)");
  }
};

template <class S>
struct EncoderLayerParams {
  TensorT<S> ln1_gamma, ln1_beta;
  TensorT<S> wq, wk, wv, wo;  // hidden x hidden, no biases
  TensorT<S> ln2_gamma, ln2_beta;
  TensorT<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

template <class S>
struct ParamsT {
  TensorT<S> embed;  // token_dim x hidden, no bias
  std::vector<EncoderLayerParams<S>> layers;
  TensorT<S> final_ln_gamma, final_ln_beta;
  TensorT<S> readout_w;  // 2*hidden x 1
  TensorT<S> cls_w1, cls_b1, cls_w2, cls_b2;

  std::vector<std::pair<std::string, TensorT<S>>> named() const {
    std::vector<std::pair<std::string, TensorT<S>>> out;
    out.emplace_back("embed", embed);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      const auto& ly = layers[l];
      out.emplace_back(p + "ln1.gamma", ly.ln1_gamma);
      out.emplace_back(p + "ln1.beta", ly.ln1_beta);
      out.emplace_back(p + "wq", ly.wq);
      out.emplace_back(p + "wk", ly.wk);
      out.emplace_back(p + "wv", ly.wv);
      out.emplace_back(p + "wo", ly.wo);
      out.emplace_back(p + "ln2.gamma", ly.ln2_gamma);
      out.emplace_back(p + "ln2.beta", ly.ln2_beta);
      out.emplace_back(p + "ffn.w1", ly.ffn_w1);
      out.emplace_back(p + "ffn.b1", ly.ffn_b1);
      out.emplace_back(p + "ffn.w2", ly.ffn_w2);
      out.emplace_back(p + "ffn.b2", ly.ffn_b2);
    }
    out.emplace_back("final_ln.gamma", final_ln_gamma);
    out.emplace_back("final_ln.beta", final_ln_beta);
    out.emplace_back("readout.w", readout_w);
    out.emplace_back("cls.w1", cls_w1);
    out.emplace_back("cls.b1", cls_b1);
    out.emplace_back("cls.w2", cls_w2);
    out.emplace_back("cls.b2", cls_b2);
    return out;
  }

  std::vector<TensorT<S>> tensors() const {
    std::vector<TensorT<S>> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
  }
};

/// Per-forward diagnostics: the readout coefficients, one row per node.
/// Row width is K, or K+1 when hop 0 participates in the softmax.
template <class S>
struct ReadoutTrace {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<S> alpha;
};

template <class S>
ParamsT<S> init_params(const ModelConfig& cfg, RngStream stream) {
  cfg.validate();
  const std::size_t dm = cfg.hidden_dim;
  const std::size_t f = cfg.ffn_width();
  ParamsT<S> p;
  std::uint64_t tag = 0;
  auto xavier = [&](std::size_t rows, std::size_t cols) {
    RngStream s = stream.split(tag++);
    return xavier_uniform<S>({rows, cols}, rows, cols, s).set_requires_grad(true);
  };
  auto vec = [&](std::size_t n, S v) { return TensorT<S>::filled({n}, v).set_requires_grad(true); };

  p.embed = xavier(cfg.token_dim, dm);
  p.layers.resize(cfg.layers);
  for (auto& ly : p.layers) {
    ly.ln1_gamma = vec(dm, S(1));
    ly.ln1_beta = vec(dm, S(0));
    ly.wq = xavier(dm, dm);
    ly.wk = xavier(dm, dm);
    ly.wv = xavier(dm, dm);
    ly.wo = xavier(dm, dm);
    ly.ln2_gamma = vec(dm, S(1));
    ly.ln2_beta = vec(dm, S(0));
    ly.ffn_w1 = xavier(dm, f);
    ly.ffn_b1 = vec(f, S(0));
    ly.ffn_w2 = xavier(f, dm);
    ly.ffn_b2 = vec(dm, S(0));
  }
  p.final_ln_gamma = vec(dm, S(1));
  p.final_ln_beta = vec(dm, S(0));
  // Zero readout weights start the hop attention at the uniform average.
  p.readout_w = TensorT<S>::zeros({2 * dm, 1}).set_requires_grad(true);
  p.cls_w1 = xavier(dm, cfg.mlp_hidden);
  p.cls_b1 = vec(cfg.mlp_hidden, S(0));
  p.cls_w2 = xavier(cfg.mlp_hidden, cfg.num_classes);
  p.cls_b2 = vec(cfg.num_classes, S(0));
  return p;
}

template <class S>
class NetworkT {
 public:
  NetworkT(ModelConfig cfg, ParamsT<S> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
  }

  static NetworkT init(const ModelConfig& cfg, std::uint64_t seed) {
    return NetworkT(cfg, init_params<S>(cfg, RngStream(seed)));
  }

  const ModelConfig& config() const { return cfg_; }
  const ParamsT<S>& params() const { return params_; }
  ParamsT<S>& params() { return params_; }

  /// tokens: b x (K+1) x d'. Returns logits b x c.
  TensorT<S> forward(const TensorT<S>& tokens, bool train, RngStream& rng,
                     ReadoutTrace<S>* trace = nullptr) const {
    const auto& sh = tokens.shape();
    if (sh.size() != 3 || sh[1] != cfg_.hops + 1 || sh[2] != cfg_.token_dim) {
      throw ValidationError("forward: expected tokens of shape [b, " + std::to_string(cfg_.hops + 1) + ", " +
                            std::to_string(cfg_.token_dim) + "], got " + format_shape(sh));
    }
    TensorT<S> z = project(tokens);

    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      z = encoder_layer(z, l, train, rng);
      if (has_nan(z)) {
        throw NumericError("NaN detected in encoder layer " + std::to_string(l));
      }
    }
    z = layernorm_lastdim(z, params_.final_ln_gamma, params_.final_ln_beta);

    TensorT<S> pooled = readout(z, trace);

    // Classifier MLP: linear -> GELU -> dropout -> linear.
    TensorT<S> h = gelu(add_bias(matmul(pooled, params_.cls_w1), params_.cls_b1));
    h = dropout(h, cfg_.dropout, rng, train);
    return add_bias(matmul(h, params_.cls_w2), params_.cls_b2);
  }

  /// Per-token linear lift into the hidden width (pure matrix product, no
  /// bias): b x (K+1) x d' -> b x (K+1) x d_m.
  TensorT<S> project(const TensorT<S>& tokens) const {
    const auto& sh = tokens.shape();
    if (sh.size() != 3 || sh[2] != cfg_.token_dim) {
      throw ValidationError("project: expected tokens of width " + std::to_string(cfg_.token_dim) + ", got " +
                            format_shape(sh));
    }
    const std::size_t b = sh[0], t = sh[1];
    return reshape(matmul(reshape(tokens, {b * t, cfg_.token_dim}), params_.embed), {b, t, cfg_.hidden_dim});
  }

  /// Pre-LN encoder layer: z + MSA(LN(z)), then z + FFN(LN(z)). Attention is
  /// over the K+1 hop tokens of each node independently.
  TensorT<S> encoder_layer(const TensorT<S>& z, std::size_t layer, bool train, RngStream& rng) const {
    const auto& ly = params_.layers[layer];
    const std::size_t b = z.dim(0), t = z.dim(1), dm = z.dim(2);
    const std::size_t dk = dm / cfg_.heads;

    TensorT<S> y = layernorm_lastdim(z, ly.ln1_gamma, ly.ln1_beta);
    TensorT<S> q = reshape(matmul(reshape(y, {b * t, dm}), ly.wq), {b, t, dm});
    TensorT<S> k = reshape(matmul(reshape(y, {b * t, dm}), ly.wk), {b, t, dm});
    TensorT<S> v = reshape(matmul(reshape(y, {b * t, dm}), ly.wv), {b, t, dm});

    TensorT<S> heads_out;
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      TensorT<S> qh = slice(q, 2, h * dk, dk);
      TensorT<S> kh = slice(k, 2, h * dk, dk);
      TensorT<S> vh = slice(v, 2, h * dk, dk);
      TensorT<S> scores = scale(matmul(qh, transpose_last2(kh)), static_cast<S>(1.0 / std::sqrt(double(dk))));
      TensorT<S> attn = softmax_lastdim(scores);
      TensorT<S> oh = matmul(attn, vh);
      heads_out = h == 0 ? oh : concat_lastdim(heads_out, oh);
    }
    TensorT<S> msa = reshape(matmul(reshape(heads_out, {b * t, dm}), ly.wo), {b, t, dm});
    msa = dropout(msa, cfg_.dropout, rng, train);
    TensorT<S> z1 = add(z, msa);

    TensorT<S> y2 = layernorm_lastdim(z1, ly.ln2_gamma, ly.ln2_beta);
    TensorT<S> f = gelu(add_bias(matmul(reshape(y2, {b * t, dm}), ly.ffn_w1), ly.ffn_b1));
    f = dropout(f, cfg_.dropout, rng, train);
    f = add_bias(matmul(f, ly.ffn_w2), ly.ffn_b2);
    f = dropout(f, cfg_.dropout, rng, train);
    return add(z1, reshape(f, {b, t, dm}));
  }

  /// Hop readout: alpha_k = softmax over k of (z_0 || z_k) w, with hop 0
  /// excluded from the softmax unless configured in; output z_0 + sum_k
  /// alpha_k z_k.
  TensorT<S> readout(const TensorT<S>& z, ReadoutTrace<S>* trace = nullptr) const {
    const std::size_t b = z.dim(0), t = z.dim(1), dm = z.dim(2);
    if (t < 2) throw ValidationError("readout: needs at least one non-zero hop");
    TensorT<S> z0 = reshape(slice(z, 1, 0, 1), {b, dm});

    const std::size_t first = cfg_.include_hop0_logit ? 0 : 1;
    const std::size_t width = t - first;
    TensorT<S> logits;
    for (std::size_t k = first; k < t; ++k) {
      TensorT<S> zk = reshape(slice(z, 1, k, 1), {b, dm});
      TensorT<S> lk = matmul(concat_lastdim(z0, zk), params_.readout_w);  // b x 1
      logits = k == first ? lk : concat_lastdim(logits, lk);
    }
    TensorT<S> alpha = softmax_lastdim(logits);  // b x width
    if (trace) {
      trace->rows = b;
      trace->width = width;
      trace->alpha = alpha.values();
    }
    TensorT<S> hops = slice(z, 1, first, width);                          // b x width x dm
    TensorT<S> mixed = reshape(matmul(reshape(alpha, {b, 1, width}), hops), {b, dm});
    return add(z0, mixed);
  }

 private:
  ModelConfig cfg_;
  ParamsT<S> params_;
};

using Network = NetworkT<float>;

/// Transformer pass with a fixed attention matrix whose last row holds the
/// given hop weights, followed by a summation readout. No learnable state;
/// operates on the raw token width. Output row v is sum_k betas[k] *
/// tokens[v, k, :], which is the decoupled-GCN aggregation of the same hops.
DenseMatrix fixed_attention_forward(const TokenTensor& tokens, std::span<const double> betas);

}  // namespace hopformer
