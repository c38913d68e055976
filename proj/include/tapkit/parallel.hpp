#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace tapkit {

/// Worker count from TAPKIT_THREADS; 1 when unset or invalid.
inline int thread_count() {
  const char* env = std::getenv("TAPKIT_THREADS");
  if (env == nullptr) return 1;
  try {
    return std::clamp(std::stoi(env), 1, 256);
  } catch (...) {
    return 1;
  }
}

/// Runs fn(begin, end, worker) over contiguous chunks of [0, n). Callers
/// write results into per-index slots so the merge does not depend on the
/// worker count. The first exception thrown by a worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, n, 0);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end, w] {
      try {
        fn(begin, end, static_cast<int>(w));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tapkit
