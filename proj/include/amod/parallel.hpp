#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace amod {

/// Runs fn(i) for i in [0, n) on at most `max_in_flight` threads at once.
/// fn must not throw; callers capture per-item failures themselves.
template <typename Fn>
void bounded_for_each(std::size_t n, std::size_t max_in_flight, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers = std::max<std::size_t>(1, std::min(n, max_in_flight));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
}

}  // namespace amod
