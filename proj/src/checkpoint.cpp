// SPDX-License-Identifier: Apache-2.0
#include "hopformer/checkpoint.hpp"

#include <cstring>

namespace hopformer {

namespace {
constexpr std::uint32_t kCheckpointMagic = 0x4b434648;  // "HFCK"
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<std::uint8_t> out;
  put_u32(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  const ModelConfig& c = ckpt.config;
  put_u64(out, c.hops);
  put_u64(out, c.token_dim);
  put_u64(out, c.hidden_dim);
  put_u64(out, c.layers);
  put_u64(out, c.heads);
  put_u64(out, c.ffn_hidden);
  put_u64(out, c.mlp_hidden);
  put_u64(out, c.num_classes);
  put_f64(out, c.dropout);
  out.push_back(c.include_hop0_logit ? 1 : 0);
  put_u64(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    put_u64(out, t.name.size());
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u64(out, t.shape.size());
    for (auto d : t.shape) put_u64(out, d);
    const auto* dp = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), dp, dp + t.data.size() * sizeof(double));
    put_u64(out, fnv1a64(t.data.data(), t.data.size() * sizeof(double)));
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size());
  if (r.remaining() < 8 || r.u32() != kCheckpointMagic) throw ValidationError(path + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.hops = r.u64();
  c.token_dim = r.u64();
  c.hidden_dim = r.u64();
  c.layers = r.u64();
  c.heads = r.u64();
  c.ffn_hidden = r.u64();
  c.mlp_hidden = r.u64();
  c.num_classes = r.u64();
  c.dropout = r.f64();
  std::uint8_t flag = 0;
  r.bytes(&flag, 1);
  c.include_hop0_logit = flag != 0;
  const std::size_t count = r.u64();
  ckpt.tensors.resize(count);
  for (auto& t : ckpt.tensors) {
    const std::size_t name_len = r.u64();
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len);
    const std::size_t ndim = r.u64();
    t.shape.resize(ndim);
    std::size_t total = 1;
    for (auto& d : t.shape) {
      d = r.u64();
      total *= d;
    }
    t.data.resize(total);
    r.bytes(t.data.data(), total * sizeof(double));
    const std::uint64_t stored = r.u64();
    if (stored != fnv1a64(t.data.data(), t.data.size() * sizeof(double))) {
      throw IoError(path + ": checksum mismatch in tensor '" + t.name + "'");
    }
  }
  return ckpt;
}

}  // namespace hopformer
