// SPDX-License-Identifier: Apache-2.0
#include "hopformer/common.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace hopformer {

std::string format_shape(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

unsigned worker_threads() {
  const char* env = std::getenv("HOPFORMER_THREADS");
  if (!env || !*env) return 1;
  long v = std::strtol(env, nullptr, 10);
  if (v < 1) return 1;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<unsigned>(v) > hw ? hw : static_cast<unsigned>(v);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const unsigned threads = worker_threads();
  if (threads <= 1 || n < 2 * threads) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 1; t < threads; ++t) {
    std::size_t b = t * chunk;
    std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

namespace {
template <class T>
void put_raw(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}
}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) { put_raw(out, v); }
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) { put_raw(out, v); }
void put_i64(std::vector<std::uint8_t>& out, std::int64_t v) { put_raw(out, v); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_raw(out, v); }
void put_f32(std::vector<std::uint8_t>& out, float v) { put_raw(out, v); }

void ByteReader::need(std::size_t n) {
  if (pos_ + n > size_) throw IoError("truncated file: needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_));
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_ + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, data_ + pos_, 8);
  pos_ += 8;
  return v;
}

std::int64_t ByteReader::i64() {
  need(8);
  std::int64_t v;
  std::memcpy(&v, data_ + pos_, 8);
  pos_ += 8;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_ + pos_, 8);
  pos_ += 8;
  return v;
}

float ByteReader::f32() {
  need(4);
  float v;
  std::memcpy(&v, data_ + pos_, 4);
  pos_ += 4;
  return v;
}

void ByteReader::bytes(void* dst, std::size_t n) {
  need(n);
  std::memcpy(dst, data_ + pos_, n);
  pos_ += n;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open file: " + path);
  std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError("read failed: " + path);
  }
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace hopformer
