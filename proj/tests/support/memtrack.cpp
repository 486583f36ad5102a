// SPDX-License-Identifier: Apache-2.0
#include "support/memtrack.hpp"

#include <atomic>
#include <cstdint>
#include <cstddef>
#include <cstdlib>
#include <new>

namespace {

std::atomic<long long> g_current{0};
std::atomic<long long> g_peak{0};

void bump(long long delta) {
  const long long now = g_current.fetch_add(delta, std::memory_order_relaxed) + delta;
  long long peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

// Layout: [raw malloc block ... | raw ptr | size | user data (aligned)].
void* alloc_tracked(std::size_t size, std::size_t align) {
  if (align < alignof(std::max_align_t)) align = alignof(std::max_align_t);
  const std::size_t header = 2 * sizeof(void*);
  void* raw = std::malloc(size + align + header);
  if (!raw) return nullptr;
  std::uintptr_t user = reinterpret_cast<std::uintptr_t>(raw) + header;
  user = (user + align - 1) & ~static_cast<std::uintptr_t>(align - 1);
  reinterpret_cast<void**>(user)[-1] = raw;
  reinterpret_cast<std::size_t*>(user)[-2] = size;
  bump(static_cast<long long>(size));
  return reinterpret_cast<void*>(user);
}

void free_tracked(void* p) {
  if (!p) return;
  void* raw = reinterpret_cast<void**>(p)[-1];
  const std::size_t size = reinterpret_cast<std::size_t*>(p)[-2];
  bump(-static_cast<long long>(size));
  std::free(raw);
}

}  // namespace

namespace memtrack {

long long current_bytes() { return g_current.load(std::memory_order_relaxed); }
long long peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed); }

}  // namespace memtrack

void* operator new(std::size_t size) {
  void* p = alloc_tracked(size, alignof(std::max_align_t));
  if (!p) throw std::bad_alloc();
  return p;
}
void* operator new[](std::size_t size) { return ::operator new(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
  return alloc_tracked(size, alignof(std::max_align_t));
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
  return alloc_tracked(size, alignof(std::max_align_t));
}
void* operator new(std::size_t size, std::align_val_t align) {
  void* p = alloc_tracked(size, static_cast<std::size_t>(align));
  if (!p) throw std::bad_alloc();
  return p;
}
void* operator new[](std::size_t size, std::align_val_t align) { return ::operator new(size, align); }
void* operator new(std::size_t size, std::align_val_t align, const std::nothrow_t&) noexcept {
  return alloc_tracked(size, static_cast<std::size_t>(align));
}
void* operator new[](std::size_t size, std::align_val_t align, const std::nothrow_t&) noexcept {
  return alloc_tracked(size, static_cast<std::size_t>(align));
}

void operator delete(void* p) noexcept { free_tracked(p); }
void operator delete[](void* p) noexcept { free_tracked(p); }
void operator delete(void* p, std::size_t) noexcept { free_tracked(p); }
void operator delete[](void* p, std::size_t) noexcept { free_tracked(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { free_tracked(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { free_tracked(p); }
void operator delete(void* p, std::align_val_t) noexcept { free_tracked(p); }
void operator delete[](void* p, std::align_val_t) noexcept { free_tracked(p); }
void operator delete(void* p, std::size_t, std::align_val_t) noexcept { free_tracked(p); }
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept { free_tracked(p); }
void operator delete(void* p, std::align_val_t, const std::nothrow_t&) noexcept { free_tracked(p); }
void operator delete[](void* p, std::align_val_t, const std::nothrow_t&) noexcept { free_tracked(p); }
