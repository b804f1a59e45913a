#include "sieve/parallel.hpp"

namespace sieve {

namespace {
std::atomic<std::size_t> g_workers{0};
}

void set_worker_count(std::size_t workers) { g_workers.store(workers); }

std::size_t worker_count() {
  const std::size_t w = g_workers.load();
  if (w != 0) return w;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace detail {
bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

}  // namespace sieve
