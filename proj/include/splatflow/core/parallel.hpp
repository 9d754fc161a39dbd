#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace splatflow {

/// Number of workers used by parallel_for (hardware concurrency, at least 1).
inline int worker_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(worker, begin, end) over a static partition of [0, n). Each worker
/// owns a contiguous chunk, so per-worker accumulators reduced in worker order
/// give results that depend only on the worker count.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    fn(0, size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const size_t b = std::min(n, w * chunk);
    const size_t e = std::min(n, b + chunk);
    threads.emplace_back([&fn, w, b, e] { fn(w, b, e); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace splatflow
