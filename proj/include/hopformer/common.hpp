// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hopformer {

/// Bad input: files, shapes, config values, out-of-range ids. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// I/O failure while reading or writing an artifact. CLI exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: NaN divergence, non-convergence, tolerance violation.
/// CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_shape(std::span<const std::size_t> shape);

/// Worker-thread cap, from HOPFORMER_THREADS (default 1 = bit-deterministic).
unsigned worker_threads();

/// Runs fn(begin, end) over [0, n) split across worker_threads() threads.
/// Partitioning is by contiguous blocks, so results do not depend on the
/// thread count for row-independent work.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// FNV-1a 64-bit over a byte range. Used for cache checksums and manifest
/// content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

std::uint64_t hash_file(const std::string& path);

// Little-endian scalar I/O for the binary formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_i64(std::vector<std::uint8_t>& out, std::int64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
void put_f32(std::vector<std::uint8_t>& out, float v);

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  float f32();
  void bytes(void* dst, std::size_t n);
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n);
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace hopformer
