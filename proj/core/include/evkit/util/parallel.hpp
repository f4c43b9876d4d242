#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace evkit {

/// Worker count from the EVKIT_THREADS environment variable, else hardware
/// concurrency.
int default_thread_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so callers that write only to their own indices get identical results for
/// any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

}  // namespace evkit
