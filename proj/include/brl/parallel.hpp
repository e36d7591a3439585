#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace brl {

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}

// 0 means hardware concurrency.
inline void set_threads(int n) { thread_setting() = std::max(0, n); }

inline int thread_count() {
  const int n = thread_setting();
  return n > 0 ? n : std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n). Each index writes only its own output slot, so
// results do not depend on scheduling. The first exception is rethrown.
template <class F>
void parallel_for(int n, F&& f) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace brl
