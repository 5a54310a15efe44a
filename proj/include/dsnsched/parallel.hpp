#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dsnsched {

// Runs fn(0..n-1) across up to `workers` threads with a fixed index-to-worker
// assignment. Callers write results to disjoint, preallocated slots, so the
// outcome never depends on the worker count. The first exception thrown by
// any worker is rethrown after all workers finish.
inline void run_indexed(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dsnsched
