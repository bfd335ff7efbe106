#include "chromcc/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace chromcc {

int max_workers() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* cap = std::getenv("CHROMCC_THREADS")) {
        const int v = std::atoi(cap);
        if (v > 0) return std::min(hw, v);
    }
    return hw;
}

void parallel_for(std::size_t begin, std::size_t end, int n_workers,
                  const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
    if (end <= begin) return;
    const std::size_t n = end - begin;
    std::size_t workers = n_workers <= 1 ? 1 : static_cast<std::size_t>(n_workers);
    workers = std::min(workers, n);
    if (workers == 1) {
        chunk_fn(begin, end);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&, lo, hi] { chunk_fn(lo, hi); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace chromcc
