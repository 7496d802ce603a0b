#pragma once

// Minimal work-sharing loop. Callers split work into a fixed number of
// chunks that does not depend on the worker count and merge partial results
// in chunk order, so outputs are identical for any thread cap.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hlsalign {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}

// Set on worker threads; nested loops run inline instead of spawning.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Caps the number of worker threads. 0 restores the hardware default.
inline void set_max_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned max_threads() {
  unsigned cap = detail::thread_cap().load();
  if (cap == 0) cap = std::max(1u, std::thread::hardware_concurrency());
  return cap;
}

/// Calls fn(i) for every i in [0, count). The first exception thrown by any
/// task is rethrown on the calling thread after all workers stop. Calls made
/// from inside a worker run serially.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = detail::in_worker ? 1 : std::min<std::size_t>(max_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    const bool was_worker = detail::in_worker;
    detail::in_worker = true;
    struct Restore {
      bool value;
      ~Restore() { detail::in_worker = value; }
    } restore{was_worker};
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
}

/// Number of fixed-size chunks covering `count` items.
inline std::size_t chunk_count(std::size_t count, std::size_t chunk) {
  return chunk == 0 ? 0 : (count + chunk - 1) / chunk;
}

}  // namespace hlsalign
