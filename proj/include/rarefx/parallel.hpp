#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rarefx::detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers using a static
/// interleaved partition. Each index is processed exactly once; callers store
/// results per index and reduce afterwards in index order. The exception of the
/// lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::size_t> error_index(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += threads) {
                try {
                    body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                    error_index[w] = i;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    std::size_t first = count, which = threads;
    for (std::size_t w = 0; w < threads; ++w)
        if (errors[w] && error_index[w] < first) {
            first = error_index[w];
            which = w;
        }
    if (which < threads) std::rethrow_exception(errors[which]);
}

inline std::size_t default_thread_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace rarefx::detail
