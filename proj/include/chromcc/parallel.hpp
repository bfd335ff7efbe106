#pragma once

#include <cstddef>
#include <functional>

namespace chromcc {

// Worker budget: min(hardware_concurrency, CHROMCC_THREADS) when the
// environment variable is set to a positive integer.
int max_workers();

// Static contiguous partition of [begin, end) across n_workers threads.
// chunk_fn(lo, hi) runs once per non-empty chunk; the partition depends
// only on the range and worker count, so results that reduce chunk
// outputs in chunk order are reproducible for a fixed worker count.
// n_workers <= 1 runs inline on the calling thread.
void parallel_for(std::size_t begin, std::size_t end, int n_workers,
                  const std::function<void(std::size_t, std::size_t)>& chunk_fn);

}  // namespace chromcc
