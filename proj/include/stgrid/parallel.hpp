#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace stgrid {

// Worker cap from STGRID_THREADS (default 1).
inline std::size_t thread_cap() {
  std::size_t cap = 1;
  if (const char* env = std::getenv("STGRID_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) cap = static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return cap;
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks never share
// output slots, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t workers = thread_cap()) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

}  // namespace stgrid
