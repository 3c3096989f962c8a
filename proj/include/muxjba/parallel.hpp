#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace muxjba {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static partition of [0, total) over `threads` workers. Results must be
/// written to per-index slots so the outcome is independent of the thread
/// count; exceptions are rethrown on the calling thread.
inline void parallel_for(std::size_t total, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    const int n = resolve_threads(threads);
    if (n <= 1 || total < 2) {
        body(0, total);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    const std::size_t chunk = (total + n - 1) / n;
    for (int w = 0; w < n; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(total, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace muxjba
