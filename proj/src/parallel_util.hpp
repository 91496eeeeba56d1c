#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace edc2rag::detail {

/// Runs fn(i) for i in [0, n) on at most `parallelism` threads. fn must not
/// throw; callers capture per-item failures themselves.
template <typename Fn>
void parallel_for_indexed(std::size_t n, std::size_t parallelism, Fn&& fn) {
    if (n == 0) return;
    if (parallelism <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(parallelism, n);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : threads) t.join();
}

}  // namespace edc2rag::detail
