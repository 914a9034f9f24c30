#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace rdsrnn {

/// Number of worker threads to use; 0 means hardware concurrency.
inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count). Work is split into contiguous blocks;
/// fn must only write to state owned by index i. The first exception thrown
/// by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = count * w / workers;
        const std::size_t end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

/// Fixed-shape pairwise reduction. The association order depends only on
/// the number of items, so results do not change with thread count.
template <typename T, typename Add>
T pairwise_reduce(std::span<const T> items, Add add) {
    if (items.size() == 1) return items[0];
    const std::size_t half = items.size() / 2;
    return add(pairwise_reduce(items.first(half), add),
               pairwise_reduce(items.subspan(half), add));
}

inline double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return pairwise_reduce(values, [](double a, double b) { return a + b; });
}

} // namespace rdsrnn
