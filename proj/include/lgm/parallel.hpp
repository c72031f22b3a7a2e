#pragma once

// Deterministic data parallelism: work is split into chunks of a fixed size
// that does not depend on the worker count, each chunk writes into its own
// slot, and callers combine slots in chunk order. Outputs are therefore
// identical for any --threads value.

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace lgm {

inline int& worker_count() {
  static int count = 1;
  return count;
}

inline void set_worker_count(int n) { worker_count() = n < 1 ? 1 : n; }

inline constexpr std::size_t kParallelChunk = 16384;

inline std::size_t chunk_count(std::size_t n) {
  return n == 0 ? 0 : (n + kParallelChunk - 1) / kParallelChunk;
}

// fn(chunk_index, begin, end) over [0, n)
template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
  const std::size_t chunks = chunk_count(n);
  if (chunks == 0) return;
  const int workers = worker_count();
  if (workers <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = c * kParallelChunk;
      const std::size_t hi = lo + kParallelChunk < n ? lo + kParallelChunk : n;
      fn(c, lo, hi);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      const std::size_t lo = c * kParallelChunk;
      const std::size_t hi = lo + kParallelChunk < n ? lo + kParallelChunk : n;
      fn(c, lo, hi);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = workers < static_cast<int>(chunks) ? workers : static_cast<int>(chunks);
  pool.reserve(spawn);
  for (int t = 0; t < spawn - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace lgm
