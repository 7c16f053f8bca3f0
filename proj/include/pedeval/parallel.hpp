#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace pedeval {

/// Evaluates fn(i) for i in [0, n) on up to `limit` threads and returns the
/// results in index order. If any call throws, the exception from the lowest
/// failing index is rethrown after all workers finish.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t limit, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<R> results(n);
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min(limit, n));

    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    results[i] = fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace pedeval
