#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace icl {

/// Worker count: ICLAB_THREADS if set and positive, else hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("ICLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Process-wide override set by the CLI's --threads flag (0 = use default).
inline unsigned& thread_override() {
  static unsigned value = 0;
  return value;
}

inline unsigned worker_count() {
  return thread_override() != 0 ? thread_override() : default_threads();
}

/// Runs fn(i) for i in [0, count) on a static partition of workers.
///
/// fn must write only to slot i of caller-owned storage; callers reduce in
/// index order afterwards, so results never depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = 0) {
  if (threads == 0) threads = worker_count();
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace icl
