#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace qcd {

inline int resolve_workers(int n_workers) {
    if (n_workers > 0) return n_workers;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(chunk_index) for chunk_index in [0, n_chunks) on a worker pool.
/// Chunks are claimed through a shared counter; fn must write results into a
/// slot addressed by chunk_index so the output layout is schedule-independent.
template <class Fn>
void parallel_chunks(std::int64_t n_chunks, int n_workers, Fn&& fn) {
    n_workers = resolve_workers(n_workers);
    if (n_workers <= 1 || n_chunks <= 1) {
        for (std::int64_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) return;
            fn(c);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace qcd
