#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ddlab {

// Number of fixed work chunks used for data-parallel accumulation. The split
// is a function of the range only, never of the thread count, so per-chunk
// results can be merged in chunk order and byte-identical runs are preserved
// on any machine.
inline constexpr int kGradChunks = 8;

// Calls fn(chunk_index, begin, end) for a fixed even split of [0, n) into
// n_chunks ranges. Chunks run on their own threads; the caller merges any
// per-chunk outputs in ascending chunk order afterwards.
template <typename Fn>
void parallel_chunks(std::size_t n, int n_chunks, Fn&& fn) {
  if (n == 0) return;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_chunks));
  for (int c = 0; c < n_chunks; ++c) {
    std::size_t begin = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(n_chunks);
    std::size_t end = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(n_chunks);
    if (begin == end) continue;
    threads.emplace_back([c, begin, end, &fn] { fn(c, begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace ddlab
