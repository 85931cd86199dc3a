#ifndef EVOEMBED_PARALLEL_HPP
#define EVOEMBED_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace evoembed {

/// Worker count from EVOEMBED_THREADS, else the hardware concurrency (at least 1).
int default_thread_count();

/// Resolves a requested thread count: values < 1 mean "use the default".
inline int resolve_threads(int requested) { return requested >= 1 ? requested : default_thread_count(); }

/**
 * Runs `fn(i)` for every `i` in `[0, n)` using up to `threads` workers.
 * Work is split into contiguous chunks; `fn` must only write to index-owned slots,
 * so results do not depend on the worker count.
 */
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(n))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_lock;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace evoembed

#endif
