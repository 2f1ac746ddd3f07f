#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace kge {

/// Runs fn(lo, hi) over contiguous blocks of [0, n). Block boundaries depend
/// only on n and threads, so results are reproducible for a fixed thread count.
template <typename Fn>
void parallel_blocks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1, n == 0 ? 1 : n);
  if (t <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(t);
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t lo = i * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
}

}  // namespace kge
