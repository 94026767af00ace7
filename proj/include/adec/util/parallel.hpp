#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace adec {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed
/// dynamically, so fn must write only to slot i. The first exception is
/// rethrown after all threads join.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t t = std::min<std::size_t>(workers, n);
  for (std::size_t k = 0; k < t; ++k) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace adec
