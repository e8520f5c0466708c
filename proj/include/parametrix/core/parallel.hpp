#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace parametrix {

/// Number of worker threads used by parallel_for. 0 means hardware concurrency.
inline std::size_t& worker_count() {
    static std::size_t n = 1;
    return n;
}

inline void set_worker_count(std::size_t n) { worker_count() = n; }

namespace detail {
inline bool& inside_parallel_region() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

/// Runs body(i) for i in [0, n). Work is split into contiguous static chunks
/// so every index is evaluated exactly once; callers write into slot i and
/// reduce serially afterwards, which keeps results independent of the number
/// of workers. Nested calls run serially on the calling worker.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    std::size_t workers = worker_count();
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1 || detail::inside_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            detail::inside_parallel_region() = true;
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace parametrix
