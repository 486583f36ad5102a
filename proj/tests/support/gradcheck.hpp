// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checking (64-bit mode, h = 1e-5).
// The forward functor must be a pure function of the input tensors' current
// values; stochastic ops must replay from a copied stream.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hopformer/rng.hpp"
#include "hopformer/tensor.hpp"

namespace hoptest {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "input i, coordinate j"
};

inline GradCheckResult gradcheck(const std::function<hopformer::TensorT<double>()>& forward,
                                 std::vector<hopformer::TensorT<double>> inputs, double h = 1e-5) {
  using hopformer::TensorT;
  for (auto& in : inputs) in.set_requires_grad(true);

  TensorT<double> loss = forward();
  for (auto& in : inputs) in.zero_grad();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& vals = inputs[i].values();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double keep = vals[j];
      vals[j] = keep + h;
      const double up = forward().item();
      vals[j] = keep - h;
      const double down = forward().item();
      vals[j] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = "input " + std::to_string(i) + ", coordinate " + std::to_string(j);
      }
    }
  }
  return result;
}

/// Random tensor with entries in [-1, 1].
inline hopformer::TensorT<double> rand_tensor(std::vector<std::size_t> shape, hopformer::RngStream& rng) {
  std::vector<double> data(hopformer::TensorT<double>::count(shape));
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return hopformer::TensorT<double>::from(std::move(shape), std::move(data));
}

/// Runs `trials` randomized gradient checks for every registered op; returns
/// the worst relative error seen. Shapes stay small so the sweep is fast.
inline double gradcheck_all_ops(int trials, std::uint64_t seed, double* out_worst = nullptr) {
  using namespace hopformer;
  RngStream rng(seed);
  double worst = 0.0;
  auto track = [&](const GradCheckResult& r) { worst = std::max(worst, r.max_rel_err); };

  for (int t = 0; t < trials; ++t) {
    const std::size_t m = 2 + rng.below(3);
    const std::size_t k = 2 + rng.below(3);
    const std::size_t n = 2 + rng.below(3);
    const std::size_t b = 1 + rng.below(3);

    {  // matmul 2D x 2D
      auto a = rand_tensor({m, k}, rng);
      auto w = rand_tensor({k, n}, rng);
      auto r = rand_tensor({m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(matmul(a, w), r)); }, {a, w}));
    }
    {  // matmul 3D x 3D
      auto a = rand_tensor({b, m, k}, rng);
      auto w = rand_tensor({b, k, n}, rng);
      auto r = rand_tensor({b, m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(matmul(a, w), r)); }, {a, w}));
    }
    {  // matmul 3D x 2D
      auto a = rand_tensor({b, m, k}, rng);
      auto w = rand_tensor({k, n}, rng);
      auto r = rand_tensor({b, m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(matmul(a, w), r)); }, {a, w}));
    }
    {  // add + scale + hadamard
      auto a = rand_tensor({m, n}, rng);
      auto c = rand_tensor({m, n}, rng);
      auto r = rand_tensor({m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(scale(add(a, c), 0.7), r)); }, {a, c}));
    }
    {  // add_bias
      auto a = rand_tensor({b, m, n}, rng);
      auto bias = rand_tensor({n}, rng);
      auto r = rand_tensor({b, m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(add_bias(a, bias), r)); }, {a, bias}));
    }
    {  // concat along the last dim
      auto a = rand_tensor({m, k}, rng);
      auto c = rand_tensor({m, n}, rng);
      auto r = rand_tensor({m, k + n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(concat_lastdim(a, c), r)); }, {a, c}));
    }
    {  // softmax
      auto a = rand_tensor({m, n}, rng);
      auto r = rand_tensor({m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(softmax_lastdim(a), r)); }, {a}));
    }
    {  // layernorm (input, gamma, beta)
      auto a = rand_tensor({m, n}, rng);
      auto g = rand_tensor({n}, rng);
      auto be = rand_tensor({n}, rng);
      auto r = rand_tensor({m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(layernorm_lastdim(a, g, be), r)); }, {a, g, be}));
    }
    {  // gelu
      auto a = rand_tensor({m, n}, rng);
      auto r = rand_tensor({m, n}, rng);
      track(gradcheck([&] { return sum_all(hadamard(gelu(a), r)); }, {a}));
    }
    {  // dropout with a replayed stream
      auto a = rand_tensor({m, n}, rng);
      auto r = rand_tensor({m, n}, rng);
      const RngStream frozen = rng.split(1000 + static_cast<std::uint64_t>(t));
      track(gradcheck(
          [&, frozen] {
            RngStream replay = frozen;
            return sum_all(hadamard(dropout(a, 0.4, replay, true), r));
          },
          {a}));
    }
    {  // cross entropy with soft labels
      auto logits = rand_tensor({m, n}, rng);
      std::vector<double> lab(m * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          lab[i * n + j] = rng.uniform();
          sum += lab[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) lab[i * n + j] /= sum;
      }
      auto labels = TensorT<double>::from({m, n}, lab);
      track(gradcheck([&] { return cross_entropy_soft(logits, labels); }, {logits}));
    }
    {  // transpose
      auto a = rand_tensor({m, n}, rng);
      auto r = rand_tensor({n, m}, rng);
      track(gradcheck([&] { return sum_all(hadamard(transpose(a), r)); }, {a}));
    }
    {  // transpose_last2
      auto a = rand_tensor({b, m, n}, rng);
      auto r = rand_tensor({b, n, m}, rng);
      track(gradcheck([&] { return sum_all(hadamard(transpose_last2(a), r)); }, {a}));
    }
    {  // slice along each axis of a 3D tensor
      auto a = rand_tensor({b, m + 1, n + 1}, rng);
      const std::size_t axis = rng.below(3);
      const std::size_t dim = a.shape()[axis];
      const std::size_t len = 1 + rng.below(dim - 1);
      const std::size_t start = rng.below(dim - len + 1);
      std::vector<std::size_t> rshape = a.shape();
      rshape[axis] = len;
      auto r = rand_tensor(rshape, rng);
      track(gradcheck([&] { return sum_all(hadamard(slice(a, axis, start, len), r)); }, {a}));
    }
    {  // reshape + mean
      auto a = rand_tensor({m, k, n}, rng);
      track(gradcheck([&] { return mean_all(reshape(a, {m * k, n})); }, {a}));
    }
  }
  if (out_worst) *out_worst = worst;
  return worst;
}

}  // namespace hoptest
