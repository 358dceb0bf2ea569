#include "lrvga/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace lrvga::log {

namespace {
std::atomic<bool> g_quiet{false};
std::atomic<long> g_count{0};
std::mutex g_mutex;
}  // namespace

void warn(std::string_view message) {
  g_count.fetch_add(1, std::memory_order_relaxed);
  if (g_quiet.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_quiet(bool quiet) { g_quiet.store(quiet); }

long warning_count() { return g_count.load(); }

}  // namespace lrvga::log
