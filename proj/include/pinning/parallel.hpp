#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace pinning {

/// Number of worker threads used by parallel_for; set once from the CLI.
inline unsigned& worker_threads() {
    static unsigned count = 1;
    return count;
}

/// Static-chunked parallel loop over [0, count). Each index is visited exactly once,
/// so callers that write per-index results get deterministic output.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned threads = std::max(1u, worker_threads());
    if (threads == 1 || count < 2 * threads) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
}

}  // namespace pinning
