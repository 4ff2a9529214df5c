#pragma once

#include <thread>
#include <vector>

#include "crowd/types.hpp"

namespace crowd {

// Runs fn(begin, end) over disjoint chunks of [0, n). Callers must write to
// disjoint slots only; reductions stay serial so results do not depend on
// the thread count.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * static_cast<Index>(threads)) {
    fn(Index{0}, n);
    return;
  }
  const Index chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (Index start = 0; start < n; start += chunk) {
    const Index stop = std::min(n, start + chunk);
    pool.emplace_back([&fn, start, stop] { fn(start, stop); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace crowd
