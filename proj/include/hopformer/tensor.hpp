// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense-tensor library with tape-based reverse-mode differentiation.
// Scalar-templated: float is the training default, double is the gradient
// check mode. Tensors are shared handles to nodes; ops record a backward
// closure on the result node, and backward() replays the closures in reverse
// topological order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "hopformer/common.hpp"
#include "hopformer/rng.hpp"

namespace hopformer {

inline bool& autograd_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

/// Disables tape recording in a scope (evaluation mode).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(autograd_enabled_flag()) { autograd_enabled_flag() = false; }
  ~NoGradGuard() { autograd_enabled_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class S>
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<S> value;
  std::vector<S> grad;  // sized lazily, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void(TensorNode<S>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

template <class S>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<TensorNode<S>> node) : node_(std::move(node)) {}

  static TensorT zeros(std::vector<std::size_t> shape) {
    return filled(std::move(shape), S(0));
  }

  static TensorT filled(std::vector<std::size_t> shape, S v) {
    auto node = std::make_shared<TensorNode<S>>();
    const std::size_t total = count(shape);
    node->shape = std::move(shape);
    node->value.assign(total, v);
    return TensorT(std::move(node));
  }

  static TensorT from(std::vector<std::size_t> shape, std::vector<S> data) {
    if (count(shape) != data.size()) {
      throw ValidationError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                            format_shape(shape));
    }
    auto node = std::make_shared<TensorNode<S>>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    return TensorT(std::move(node));
  }

  static TensorT scalar(S v) { return filled({1}, v); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t rank() const { return node_->shape.size(); }

  const std::vector<S>& values() const { return node_->value; }
  std::vector<S>& values() { return node_->value; }
  S item() const {
    if (size() != 1) throw ValidationError("item() on non-scalar tensor of shape " + format_shape(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    node_->requires_grad = v;
    if (v) node_->ensure_grad();
    return *this;
  }

  const std::vector<S>& grad() const {
    const_cast<TensorNode<S>*>(node_.get())->ensure_grad();
    return node_->grad;
  }

  void zero_grad() {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  /// Reverse pass from a scalar. Interior tape nodes get fresh gradient
  /// buffers per pass; leaf tensors (parameters) accumulate across calls
  /// until zero_grad().
  void backward() const {
    if (size() != 1) throw ValidationError("backward() requires a scalar loss, got shape " + format_shape(shape()));
    // Iterative postorder DFS; each node enters the order exactly once.
    std::vector<TensorNode<S>*> order;
    std::vector<std::pair<TensorNode<S>*, std::size_t>> stack;
    std::vector<TensorNode<S>*> seen;
    auto mark = [&seen](TensorNode<S>* n) {
      if (std::find(seen.begin(), seen.end(), n) != seen.end()) return false;
      seen.push_back(n);
      return true;
    };
    if (node_->requires_grad && mark(node_.get())) stack.emplace_back(node_.get(), 0);
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        TensorNode<S>* p = n->parents[next++].get();
        if (p->requires_grad && mark(p)) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    for (TensorNode<S>* n : order) {
      if (n->backward_fn) {
        n->grad.assign(n->value.size(), S(0));
      }
    }
    node_->ensure_grad();
    node_->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

  std::shared_ptr<TensorNode<S>> node() const { return node_; }

  static std::size_t count(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

template <class S>
TensorT<S> make_result(std::vector<std::size_t> shape, std::vector<S> value,
                       std::initializer_list<TensorT<S>> inputs,
                       std::function<void(TensorNode<S>&)> backward) {
  auto node = std::make_shared<TensorNode<S>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (autograd_enabled_flag()) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) node->parents.push_back(t.node());
      node->backward_fn = std::move(backward);
    }
  }
  return TensorT<S>(std::move(node));
}

template <class S>
void accumulate(const std::shared_ptr<TensorNode<S>>& node, std::size_t idx, S v) {
  if (!node->requires_grad) return;
  node->ensure_grad();
  node->grad[idx] += v;
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: 2D x 2D, batched 3D x 3D, and 3D x 2D (shared right operand).

template <class S>
void matmul_kernel(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  // c (m x n) += a (m x k) * b (k x n); c must be zeroed by the caller.
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void matmul_atb_kernel(const S* a, const S* c, S* b, std::size_t m, std::size_t k, std::size_t n) {
  // b (k x n) += a^T (k x m) * c (m x n)
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    const S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) brow[j] += av * crow[j];
    }
  }
}

template <class S>
void matmul_abt_kernel(const S* c, const S* b, S* a, std::size_t m, std::size_t k, std::size_t n) {
  // a (m x k) += c (m x n) * b^T (n x k)
  for (std::size_t i = 0; i < m; ++i) {
    const S* crow = c + i * n;
    S* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const S* brow = b + p * n;
      S acc = S(0);
      for (std::size_t j = 0; j < n; ++j) acc += crow[j] * brow[j];
      arow[p] += acc;
    }
  }
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool a3 = sa.size() == 3, b3 = sb.size() == 3;
  detail::check((sa.size() == 2 || a3) && (sb.size() == 2 || b3) && !(sa.size() == 2 && b3),
                "matmul: unsupported ranks for shapes " + format_shape(sa) + " and " + format_shape(sb));
  const std::size_t batch = a3 ? sa[0] : 1;
  const std::size_t m = a3 ? sa[1] : sa[0];
  const std::size_t k = a3 ? sa[2] : sa[1];
  const std::size_t kb = b3 ? sb[1] : sb[0];
  const std::size_t n = b3 ? sb[2] : sb[1];
  detail::check(k == kb && (!b3 || sb[0] == batch),
                "matmul: shape mismatch between " + format_shape(sa) + " and " + format_shape(sb));

  std::vector<std::size_t> out_shape = a3 ? std::vector<std::size_t>{batch, m, n} : std::vector<std::size_t>{m, n};
  std::vector<S> out(batch * m * n, S(0));
  for (std::size_t bi = 0; bi < batch; ++bi) {
    matmul_kernel(a.values().data() + bi * m * k, b.values().data() + (b3 ? bi * k * n : 0),
                  out.data() + bi * m * n, m, k, n);
  }

  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<S>(
      std::move(out_shape), std::move(out), {a, b}, [an, bn, batch, m, k, n, b3](TensorNode<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t bi = 0; bi < batch; ++bi) {
            matmul_abt_kernel(self.grad.data() + bi * m * n, bn->value.data() + (b3 ? bi * k * n : 0),
                              an->grad.data() + bi * m * k, m, k, n);
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t bi = 0; bi < batch; ++bi) {
            matmul_atb_kernel(an->value.data() + bi * m * k, self.grad.data() + bi * m * n,
                              bn->grad.data() + (b3 ? bi * k * n : 0), m, k, n);
          }
        }
      });
}

// ---------------------------------------------------------------------------

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check(a.shape() == b.shape(),
                "add: shape mismatch between " + format_shape(a.shape()) + " and " + format_shape(b.shape()));
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<S>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

/// a is [..., d], bias is [d]; the bias is added to every trailing row.
template <class S>
TensorT<S> add_bias(const TensorT<S>& a, const TensorT<S>& bias) {
  detail::check(bias.rank() == 1 && a.rank() >= 1 && a.shape().back() == bias.dim(0),
                "add_bias: shape mismatch between " + format_shape(a.shape()) + " and " + format_shape(bias.shape()));
  const std::size_t d = bias.dim(0);
  const std::size_t rows = a.size() / d;
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = a.values()[r * d + j] + bias.values()[j];
  }
  auto an = a.node();
  auto bn = bias.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a, bias}, [an, bn, rows, d](TensorNode<S>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) bn->grad[j] += self.grad[r * d + j];
      }
    }
  });
}

/// Elementwise product of same-shape tensors.
template <class S>
TensorT<S> hadamard(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check(a.shape() == b.shape(),
                "hadamard: shape mismatch between " + format_shape(a.shape()) + " and " + format_shape(b.shape()));
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<S>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  auto an = a.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a}, [an, c](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

template <class S>
TensorT<S> concat_lastdim(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check(a.rank() == b.rank() && a.rank() >= 1,
                "concat: rank mismatch between " + format_shape(a.shape()) + " and " + format_shape(b.shape()));
  for (std::size_t i = 0; i + 1 < a.rank(); ++i) {
    detail::check(a.dim(i) == b.dim(i),
                  "concat: shape mismatch between " + format_shape(a.shape()) + " and " + format_shape(b.shape()));
  }
  const std::size_t da = a.shape().back();
  const std::size_t db = b.shape().back();
  const std::size_t rows = a.size() / std::max<std::size_t>(da, 1);
  detail::check(da + db > 0, "concat: empty last dimension");
  std::vector<std::size_t> shape = a.shape();
  shape.back() = da + db;
  std::vector<S> out(rows * (da + db));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * da, da, out.data() + r * (da + db));
    std::copy_n(b.values().data() + r * db, db, out.data() + r * (da + db) + da);
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<S>(std::move(shape), std::move(out), {a, b}, [an, bn, rows, da, db](TensorNode<S>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < da; ++j) an->grad[r * da + j] += self.grad[r * (da + db) + j];
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < db; ++j) bn->grad[r * db + j] += self.grad[r * (da + db) + da + j];
      }
    }
  });
}

template <class S>
TensorT<S> softmax_lastdim(const TensorT<S>& a) {
  detail::check(a.rank() >= 1 && a.shape().back() > 0,
                "softmax: empty last dimension in shape " + format_shape(a.shape()));
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.size() / d;
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = a.values().data() + r * d;
    S* y = out.data() + r * d;
    S mx = x[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= sum;
  }
  auto an = a.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a}, [an, rows, d](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* yr = self.value.data() + r * d;
      const S* gr = self.grad.data() + r * d;
      S dot = S(0);
      for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < d; ++j) {
        an->grad[r * d + j] += yr[j] * (gr[j] - dot);
      }
    }
  });
}

template <class S>
TensorT<S> layernorm_lastdim(const TensorT<S>& a, const TensorT<S>& gamma, const TensorT<S>& beta,
                             S eps = S(1e-5)) {
  const std::size_t d = a.shape().back();
  detail::check(gamma.rank() == 1 && beta.rank() == 1 && gamma.dim(0) == d && beta.dim(0) == d,
                "layernorm: affine shape mismatch, input " + format_shape(a.shape()) + " gamma " +
                    format_shape(gamma.shape()) + " beta " + format_shape(beta.shape()));
  const std::size_t rows = a.size() / d;
  std::vector<S> out(a.size());
  std::vector<S> xhat(a.size());
  std::vector<S> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = a.values().data() + r * d;
    S mean = S(0);
    for (std::size_t j = 0; j < d; ++j) mean += x[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (std::size_t j = 0; j < d; ++j) {
      const S c = x[j] - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S inv = S(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const S h = (x[j] - mean) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = gamma.values()[j] * h + beta.values()[j];
    }
  }
  auto an = a.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return detail::make_result<S>(
      a.shape(), std::move(out), {a, gamma, beta},
      [an, gn, bn, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode<S>& self) {
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        if (an->requires_grad) an->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const S* g = self.grad.data() + r * d;
          const S* h = xhat.data() + r * d;
          if (gn->requires_grad || bn->requires_grad) {
            for (std::size_t j = 0; j < d; ++j) {
              if (gn->requires_grad) gn->grad[j] += g[j] * h[j];
              if (bn->requires_grad) bn->grad[j] += g[j];
            }
          }
          if (an->requires_grad) {
            S mean_dh = S(0), mean_dh_h = S(0);
            for (std::size_t j = 0; j < d; ++j) {
              const S dh = g[j] * gn->value[j];
              mean_dh += dh;
              mean_dh_h += dh * h[j];
            }
            mean_dh /= static_cast<S>(d);
            mean_dh_h /= static_cast<S>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const S dh = g[j] * gn->value[j];
              an->grad[r * d + j] += inv_std[r] * (dh - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

/// Exact (erf-based) GELU.
template <class S>
TensorT<S> gelu(const TensorT<S>& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(a.values()[i]);
    out[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  }
  auto an = a.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a}, [an](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = static_cast<double>(an->value[i]);
      const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      an->grad[i] += self.grad[i] * static_cast<S>(phi + x * pdf);
    }
  });
}

/// Inverted dropout; identity in eval mode. The mask comes from the explicit
/// stream, so a copied stream replays the same mask.
template <class S>
TensorT<S> dropout(const TensorT<S>& a, double p, RngStream& rng, bool train) {
  detail::check(p >= 0.0 && p < 1.0, "dropout: rate must be in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return a;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  std::vector<S> mask(a.size());
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keep_scale : S(0);
    out[i] = a.values()[i] * mask[i];
  }
  auto an = a.node();
  return detail::make_result<S>(a.shape(), std::move(out), {a}, [an, mask = std::move(mask)](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * mask[i];
  });
}

/// Soft-label cross entropy on logits, averaged over rows. Rows of labels are
/// expected to sum to 1 (one-hot rows are the hard-label case).
template <class S>
TensorT<S> cross_entropy_soft(const TensorT<S>& logits, const TensorT<S>& labels) {
  detail::check(logits.rank() == 2 && logits.shape() == labels.shape(),
                "cross_entropy: shape mismatch between logits " + format_shape(logits.shape()) + " and labels " +
                    format_shape(labels.shape()));
  const std::size_t rows = logits.dim(0);
  const std::size_t c = logits.dim(1);
  detail::check(c > 0, "cross_entropy: empty class dimension");
  detail::check(rows > 0, "cross_entropy: empty labeled set");
  std::vector<S> probs(rows * c);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = logits.values().data() + r * c;
    const S* y = labels.values().data() + r * c;
    double mx = static_cast<double>(x[0]);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(x[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(x[j]) - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = static_cast<S>(std::exp(static_cast<double>(x[j]) - lse));
      total += static_cast<double>(y[j]) * (lse - static_cast<double>(x[j]));
    }
  }
  auto ln = logits.node();
  auto yn = labels.node();
  const S inv_rows = static_cast<S>(1.0 / static_cast<double>(rows));
  return detail::make_result<S>(
      {1}, {static_cast<S>(total / static_cast<double>(rows))}, {logits, labels},
      [ln, yn, rows, c, inv_rows, probs = std::move(probs)](TensorNode<S>& self) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const S g = self.grad[0] * inv_rows;
        for (std::size_t r = 0; r < rows; ++r) {
          const S* y = yn->value.data() + r * c;
          S ysum = S(0);
          for (std::size_t j = 0; j < c; ++j) ysum += y[j];
          for (std::size_t j = 0; j < c; ++j) {
            ln->grad[r * c + j] += g * (probs[r * c + j] * ysum - y[j]);
          }
        }
      });
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
  detail::check(a.rank() == 2, "transpose: expected rank 2, got shape " + format_shape(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  }
  auto an = a.node();
  return detail::make_result<S>({n, m}, std::move(out), {a}, [an, m, n](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j * m + i];
    }
  });
}

template <class S>
TensorT<S> transpose_last2(const TensorT<S>& a) {
  detail::check(a.rank() == 3, "transpose_last2: expected rank 3, got shape " + format_shape(a.shape()));
  const std::size_t b = a.dim(0), m = a.dim(1), n = a.dim(2);
  std::vector<S> out(a.size());
  for (std::size_t bi = 0; bi < b; ++bi) {
    const S* src = a.values().data() + bi * m * n;
    S* dst = out.data() + bi * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
  }
  auto an = a.node();
  return detail::make_result<S>({b, n, m}, std::move(out), {a}, [an, b, m, n](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t bi = 0; bi < b; ++bi) {
      const S* g = self.grad.data() + bi * m * n;
      S* dst = an->grad.data() + bi * m * n;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += g[j * m + i];
      }
    }
  });
}

/// Contiguous slice along one axis.
template <class S>
TensorT<S> slice(const TensorT<S>& a, std::size_t axis, std::size_t start, std::size_t len) {
  detail::check(axis < a.rank(), "slice: axis " + std::to_string(axis) + " out of range for shape " +
                                     format_shape(a.shape()));
  detail::check(start + len <= a.dim(axis) && len > 0,
                "slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                    ") out of bounds for shape " + format_shape(a.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t dim = a.dim(axis);
  std::vector<std::size_t> shape = a.shape();
  shape[axis] = len;
  std::vector<S> out(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < len; ++i) {
      std::copy_n(a.values().data() + (o * dim + start + i) * inner, inner, out.data() + (o * len + i) * inner);
    }
  }
  auto an = a.node();
  return detail::make_result<S>(std::move(shape), std::move(out), {a},
                                [an, outer, inner, dim, start, len](TensorNode<S>& self) {
                                  if (!an->requires_grad) return;
                                  an->ensure_grad();
                                  for (std::size_t o = 0; o < outer; ++o) {
                                    for (std::size_t i = 0; i < len; ++i) {
                                      const S* g = self.grad.data() + (o * len + i) * inner;
                                      S* dst = an->grad.data() + (o * dim + start + i) * inner;
                                      for (std::size_t j = 0; j < inner; ++j) dst[j] += g[j];
                                    }
                                  }
                                });
}

template <class S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<std::size_t> shape) {
  detail::check(TensorT<S>::count(shape) == a.size(),
                "reshape: cannot view " + format_shape(a.shape()) + " as " + format_shape(shape));
  std::vector<S> out = a.values();
  auto an = a.node();
  return detail::make_result<S>(std::move(shape), std::move(out), {a}, [an](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

template <class S>
TensorT<S> sum_all(const TensorT<S>& a) {
  S total = S(0);
  for (S v : a.values()) total += v;
  auto an = a.node();
  return detail::make_result<S>({1}, {total}, {a}, [an](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
  });
}

template <class S>
TensorT<S> mean_all(const TensorT<S>& a) {
  detail::check(a.size() > 0, "mean: empty tensor");
  S total = S(0);
  for (S v : a.values()) total += v;
  const S inv = S(1) / static_cast<S>(a.size());
  auto an = a.node();
  return detail::make_result<S>({1}, {total * inv}, {a}, [an, inv](TensorNode<S>& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0] * inv;
  });
}

template <class S>
bool has_nan(const TensorT<S>& a) {
  for (S v : a.values()) {
    if (std::isnan(static_cast<double>(v))) return true;
  }
  return false;
}

/// Xavier-uniform initialization: U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
template <class S>
TensorT<S> xavier_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                          RngStream& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<S> data(TensorT<S>::count(shape));
  for (auto& v : data) v = static_cast<S>(rng.uniform(-r, r));
  return TensorT<S>::from(std::move(shape), std::move(data));
}

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace hopformer
