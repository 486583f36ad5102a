// SPDX-License-Identifier: Apache-2.0
#include "hopformer/tokens.hpp"

#include <cstring>

namespace hopformer {

namespace {

constexpr std::uint32_t kTokenMagic = 0x4b544648;  // "HFTK"
constexpr std::uint32_t kTokenVersion = 1;
// magic, version, n, K, d', dtype
constexpr std::size_t kTokenHeaderBytes = 4 + 4 + 8 + 8 + 8 + 4;

std::size_t dtype_size(TokenDType t) { return t == TokenDType::F32 ? 4 : 8; }

TokenCacheInfo read_header(ByteReader& r, const std::string& path) {
  if (r.remaining() < kTokenHeaderBytes || r.u32() != kTokenMagic) {
    throw ValidationError(path + ": not a token cache");
  }
  const std::uint32_t version = r.u32();
  if (version != kTokenVersion) {
    throw ValidationError(path + ": unsupported token cache version " + std::to_string(version));
  }
  TokenCacheInfo info;
  info.n = r.u64();
  info.hops = r.u64();
  info.token_dim = r.u64();
  const std::uint32_t dtype = r.u32();
  if (dtype > 1) throw ValidationError(path + ": unknown token dtype tag " + std::to_string(dtype));
  info.dtype = static_cast<TokenDType>(dtype);
  return info;
}

}  // namespace

TokenTensor hop_tokens(const NormalizedAdjacency& a, const DenseMatrix& x_prime, std::size_t hops) {
  if (x_prime.rows != a.n) {
    throw ValidationError("hop_tokens: feature matrix has " + std::to_string(x_prime.rows) +
                          " rows but graph has " + std::to_string(a.n) + " nodes");
  }
  TokenTensor t;
  t.n = a.n;
  t.hops = hops;
  t.token_dim = x_prime.cols;
  t.data.resize(a.n * (hops + 1) * x_prime.cols);

  DenseMatrix cur = x_prime;
  for (std::size_t k = 0; k <= hops; ++k) {
    for (std::size_t v = 0; v < t.n; ++v) {
      std::memcpy(t.data.data() + (v * (hops + 1) + k) * t.token_dim, cur.row(v).data(),
                  t.token_dim * sizeof(double));
    }
    if (k < hops) cur = spmm(a, cur);
  }
  return t;
}

void save_tokens(const TokenTensor& t, const std::string& path, TokenDType dtype) {
  std::vector<std::uint8_t> out;
  const std::size_t count = t.data.size();
  out.reserve(kTokenHeaderBytes + count * dtype_size(dtype) + 8);
  put_u32(out, kTokenMagic);
  put_u32(out, kTokenVersion);
  put_u64(out, t.n);
  put_u64(out, t.hops);
  put_u64(out, t.token_dim);
  put_u32(out, static_cast<std::uint32_t>(dtype));
  const std::size_t payload_start = out.size();
  // Hop-major payload: (K+1) blocks of n x d'.
  for (std::size_t k = 0; k <= t.hops; ++k) {
    for (std::size_t v = 0; v < t.n; ++v) {
      for (std::size_t c = 0; c < t.token_dim; ++c) {
        const double val = t.at(v, k, c);
        if (dtype == TokenDType::F32) {
          put_f32(out, static_cast<float>(val));
        } else {
          put_f64(out, val);
        }
      }
    }
  }
  put_u64(out, fnv1a64(out.data() + payload_start, out.size() - payload_start));
  write_file(path, out);
}

TokenTensor load_tokens(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size());
  const TokenCacheInfo info = read_header(r, path);
  const std::size_t count = info.n * (info.hops + 1) * info.token_dim;
  const std::size_t payload_bytes = count * dtype_size(info.dtype);
  if (r.remaining() < payload_bytes + 8) {
    throw IoError(path + ": truncated token cache (header records " + std::to_string(payload_bytes) +
                  " payload bytes, " + std::to_string(r.remaining()) + " remain)");
  }
  const std::size_t payload_start = r.pos();
  TokenTensor t;
  t.n = info.n;
  t.hops = info.hops;
  t.token_dim = info.token_dim;
  t.data.resize(count);
  for (std::size_t k = 0; k <= t.hops; ++k) {
    for (std::size_t v = 0; v < t.n; ++v) {
      for (std::size_t c = 0; c < t.token_dim; ++c) {
        t.at(v, k, c) = info.dtype == TokenDType::F32 ? static_cast<double>(r.f32()) : r.f64();
      }
    }
  }
  const std::uint64_t stored = r.u64();
  const std::uint64_t actual = fnv1a64(bytes.data() + payload_start, payload_bytes);
  if (stored != actual) throw IoError(path + ": token cache checksum mismatch");
  return t;
}

TokenCacheInfo peek_tokens(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open token cache: " + path);
  std::uint8_t header[kTokenHeaderBytes];
  const std::size_t got = std::fread(header, 1, sizeof header, f);
  std::fclose(f);
  ByteReader r(header, got);
  return read_header(r, path);
}

TokenStore TokenStore::open(const std::string& path, std::size_t resident_bytes) {
  TokenStore s;
  s.info_ = peek_tokens(path);
  const std::size_t payload = s.info_.n * (s.info_.hops + 1) * s.info_.token_dim * dtype_size(s.info_.dtype);
  if (payload <= resident_bytes) {
    const TokenTensor t = load_tokens(path);
    s.resident_.assign(t.data.begin(), t.data.end());
    return s;
  }
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open token cache: " + path);
  s.file_ = std::shared_ptr<std::FILE>(f, FileCloser{});
  s.payload_offset_ = kTokenHeaderBytes;
  return s;
}

TokenStore TokenStore::from_tensor(const TokenTensor& t) {
  TokenStore s;
  s.info_ = {t.n, t.hops, t.token_dim, TokenDType::F32};
  s.resident_.assign(t.data.begin(), t.data.end());
  return s;
}

void TokenStore::gather(std::span<const std::size_t> nodes, std::vector<float>& out) const {
  const std::size_t row = row_size();
  out.resize(nodes.size() * row);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= info_.n) {
      throw ValidationError("TokenStore: node id " + std::to_string(nodes[i]) + " out of range");
    }
  }
  if (!resident_.empty() || !file_) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::memcpy(out.data() + i * row, resident_.data() + nodes[i] * row, row * sizeof(float));
    }
    return;
  }
  // Streamed: the file is hop-major, so one node row is (K+1) strided reads.
  const std::size_t elem = dtype_size(info_.dtype);
  const std::size_t dim = info_.token_dim;
  std::vector<std::uint8_t> buf(dim * elem);
  for (std::size_t k = 0; k <= info_.hops; ++k) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::size_t offset = payload_offset_ + ((k * info_.n + nodes[i]) * dim) * elem;
      if (std::fseek(file_.get(), static_cast<long>(offset), SEEK_SET) != 0 ||
          std::fread(buf.data(), elem, dim, file_.get()) != dim) {
        throw IoError("TokenStore: read failed (truncated token cache?)");
      }
      float* dst = out.data() + (i * (info_.hops + 1) + k) * dim;
      if (info_.dtype == TokenDType::F32) {
        std::memcpy(dst, buf.data(), dim * sizeof(float));
      } else {
        const double* src = reinterpret_cast<const double*>(buf.data());
        for (std::size_t c = 0; c < dim; ++c) dst[c] = static_cast<float>(src[c]);
      }
    }
  }
}

}  // namespace hopformer
