#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace posi {

// Resolves a requested thread count; 0 means "all hardware threads".
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(item, worker) for every item in [0, count) on up to `threads`
// workers. Items are claimed dynamically; callers must make the combined
// result independent of which worker ran which item.
template <class Body>
void parallel_items(std::size_t count, int threads, Body&& body) {
    const int workers = static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(std::max(1, threads)), std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i, w);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Splits [0, n) into `parts` contiguous ranges; range k is [bounds[k], bounds[k+1]).
inline std::vector<std::size_t> split_range(std::size_t n, std::size_t parts) {
    parts = std::max<std::size_t>(1, std::min(parts, std::max<std::size_t>(n, 1)));
    std::vector<std::size_t> bounds(parts + 1);
    for (std::size_t k = 0; k <= parts; ++k) bounds[k] = n * k / parts;
    return bounds;
}

}  // namespace posi
