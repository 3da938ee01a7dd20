#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace hrmm {

/// Worker count from HRMM_THREADS (default 1).
inline int worker_count() {
  static const int n = [] {
    const char* env = std::getenv("HRMM_THREADS");
    const int v = env ? std::atoi(env) : 1;
    return std::max(1, v);
  }();
  return n;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks write disjoint outputs,
/// so results do not depend on the worker count.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(worker_count(), std::max(1, n / 256));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int b = w * chunk;
    const int e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace hrmm
