// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "hopformer/tensor.hpp"

namespace hopformer {

/// AdamW with decoupled weight decay:
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
/// Gradients are left in place; the caller zeroes them after the step.
template <class S>
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;

  AdamW(std::vector<TensorT<S>> params, Options opts) : params_(std::move(params)), opts_(opts) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), S(0));
      v_.emplace_back(p.size(), S(0));
    }
    initialized_ = true;
  }

  void step() {
    if (!initialized_) throw ValidationError("AdamW: step() on uninitialized optimizer state");
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].values();
      const auto& g = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = opts_.beta1 * static_cast<double>(m[j]) + (1.0 - opts_.beta1) * gj;
        const double vj = opts_.beta2 * static_cast<double>(v[j]) + (1.0 - opts_.beta2) * gj * gj;
        m[j] = static_cast<S>(mj);
        v[j] = static_cast<S>(vj);
        const double m_hat = mj / bc1;
        const double v_hat = vj / bc2;
        const double pj = static_cast<double>(p[j]);
        p[j] = static_cast<S>(pj - opts_.lr * m_hat / (std::sqrt(v_hat) + opts_.eps) -
                              opts_.lr * opts_.weight_decay * pj);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t step_count() const { return t_; }
  const Options& options() const { return opts_; }

 private:
  std::vector<TensorT<S>> params_;
  std::vector<std::vector<S>> m_, v_;
  Options opts_;
  std::size_t t_ = 0;
  bool initialized_ = false;
};

}  // namespace hopformer
