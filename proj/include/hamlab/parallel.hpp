#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace hamlab::par {

// Fixed-size blocks of work items, each block processed whole by one worker.
// Per-block results land in a vector indexed by block id, so the combined
// result is identical for any worker count.
inline constexpr std::size_t kBlockSize = 4096;

inline unsigned clamp_threads(unsigned requested) {
    const unsigned hw = std::thread::hardware_concurrency();
    if (requested == 0) requested = hw ? hw : 1;
    return requested;
}

template <class BlockResult, class BlockFn>
std::vector<BlockResult> run_blocks(std::size_t n_units, unsigned threads, BlockFn fn,
                                    std::size_t block_size = kBlockSize) {
    const std::size_t n_blocks = (n_units + block_size - 1) / block_size;
    std::vector<BlockResult> out(n_blocks);
    threads = clamp_threads(threads);
    if (threads <= 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t lo = b * block_size;
            const std::size_t hi = std::min(n_units, lo + block_size);
            out[b] = fn(b, lo, hi);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::size_t lo = b * block_size;
            const std::size_t hi = std::min(n_units, lo + block_size);
            out[b] = fn(b, lo, hi);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace hamlab::par
