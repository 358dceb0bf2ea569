// Replaces the C allocator entry points with counting wrappers around glibc's
// internal ones. Eigen allocates through malloc, so hooking operator new alone
// would miss most of the traffic.

#include "lrvga/heap_probe.hpp"

#include <malloc.h>

#include <atomic>
#include <cerrno>
#include <cstddef>

extern "C" {
void* __libc_malloc(std::size_t);
void __libc_free(void*);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void* __libc_valloc(std::size_t);
void* __libc_pvalloc(std::size_t);
}

namespace {

std::atomic<long> g_current{0};
std::atomic<long> g_peak{0};
std::atomic<long> g_largest{0};

void bump_max(std::atomic<long>& target, long value) {
  long seen = target.load(std::memory_order_relaxed);
  while (value > seen && !target.compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
  }
}

void* track(void* ptr, std::size_t requested) {
  if (ptr == nullptr) return ptr;
  const long size = static_cast<long>(malloc_usable_size(ptr));
  const long now = g_current.fetch_add(size, std::memory_order_relaxed) + size;
  bump_max(g_peak, now);
  bump_max(g_largest, static_cast<long>(requested));
  return ptr;
}

void untrack(void* ptr) {
  if (ptr == nullptr) return;
  g_current.fetch_sub(static_cast<long>(malloc_usable_size(ptr)), std::memory_order_relaxed);
}

}  // namespace

extern "C" {

void* malloc(std::size_t size) { return track(__libc_malloc(size), size); }

void free(void* ptr) {
  untrack(ptr);
  __libc_free(ptr);
}

void* calloc(std::size_t count, std::size_t size) {
  return track(__libc_calloc(count, size), count * size);
}

void* realloc(void* ptr, std::size_t size) {
  const long old = ptr ? static_cast<long>(malloc_usable_size(ptr)) : 0;
  void* out = __libc_realloc(ptr, size);
  // A failed realloc leaves the block alive; realloc(p, 0) frees it.
  if (out == nullptr && !(ptr != nullptr && size == 0)) return nullptr;
  g_current.fetch_sub(old, std::memory_order_relaxed);
  if (out == nullptr) return nullptr;
  return track(out, size);
}

void* memalign(std::size_t alignment, std::size_t size) {
  return track(__libc_memalign(alignment, size), size);
}

void* aligned_alloc(std::size_t alignment, std::size_t size) {
  return track(__libc_memalign(alignment, size), size);
}

int posix_memalign(void** out, std::size_t alignment, std::size_t size) {
  if (alignment < sizeof(void*) || (alignment & (alignment - 1)) != 0) return EINVAL;
  void* ptr = __libc_memalign(alignment, size);
  if (ptr == nullptr) return ENOMEM;
  *out = track(ptr, size);
  return 0;
}

void* valloc(std::size_t size) { return track(__libc_valloc(size), size); }

void* pvalloc(std::size_t size) { return track(__libc_pvalloc(size), size); }

}  // extern "C"

namespace lrvga::heap {

bool active() { return true; }
long current_bytes() { return g_current.load(std::memory_order_relaxed); }
long peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
long largest_allocation() { return g_largest.load(std::memory_order_relaxed); }

void reset_peak() {
  g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed);
  g_largest.store(0, std::memory_order_relaxed);
}

}  // namespace lrvga::heap
