#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sieve {

/// Process-wide worker-count hint. 0 means hardware concurrency.
void set_worker_count(std::size_t workers);
std::size_t worker_count();

namespace detail {
/// Set on worker threads so nested parallel_for calls run inline.
bool& in_parallel_region();
}  // namespace detail

/// Calls fn(i) for i in [0, count) across worker threads. Callers write
/// results by index, so output never depends on scheduling. If any call
/// throws, the exception from the smallest index is rethrown. Nested calls
/// run serially on the calling worker.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = detail::in_parallel_region() ? 1 : std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    detail::in_parallel_region() = true;
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    detail::in_parallel_region() = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sieve
