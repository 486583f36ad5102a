// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "hopformer/model.hpp"

namespace hopformer {

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

/// Model config plus flattened parameters; each tensor carries a checksum in
/// the serialized form. Values are stored as f64, which round-trips both the
/// float and the double engines exactly.
struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <class S>
Checkpoint make_checkpoint(const ModelConfig& cfg, const ParamsT<S>& params) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  for (const auto& [name, t] : params.named()) {
    CheckpointTensor entry;
    entry.name = name;
    entry.shape = t.shape();
    entry.data.assign(t.values().begin(), t.values().end());
    ckpt.tensors.push_back(std::move(entry));
  }
  return ckpt;
}

template <class S>
NetworkT<S> network_from_checkpoint(const Checkpoint& ckpt) {
  ParamsT<S> params = init_params<S>(ckpt.config, RngStream(0));
  auto named = params.named();
  if (named.size() != ckpt.tensors.size()) {
    throw ValidationError("checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                          std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = ckpt.tensors[i];
    auto& [name, tensor] = named[i];
    if (entry.name != name) {
      throw ValidationError("checkpoint: tensor " + std::to_string(i) + " is '" + entry.name + "', expected '" +
                            name + "'");
    }
    if (entry.shape != tensor.shape()) {
      throw ValidationError("checkpoint: tensor '" + name + "' has shape " + format_shape(entry.shape) +
                            ", expected " + format_shape(tensor.shape()));
    }
    auto& dst = tensor.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<S>(entry.data[j]);
  }
  return NetworkT<S>(ckpt.config, std::move(params));
}

}  // namespace hopformer
