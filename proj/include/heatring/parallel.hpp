#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace heatring {

/// Runs fn(i) for i in [0, n) on up to `workers` threads using contiguous
/// static chunks. Callers write into pre-sized per-index slots, so results do
/// not depend on the worker count. The first exception thrown (lowest chunk)
/// is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (n == 0) return;
    const std::size_t threads = std::min<std::size_t>(std::max(1u, workers), n);
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t lo = n * t / threads;
            const std::size_t hi = n * (t + 1) / threads;
            pool.emplace_back([&, t, lo, hi] {
                try {
                    for (std::size_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace heatring
