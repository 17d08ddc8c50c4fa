#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace neuronscope {

inline std::size_t default_jobs() { return std::max<std::size_t>(1, std::thread::hardware_concurrency()); }

// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any call is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lk(failure_mu);
                        if (!failure) failure = std::current_exception();
                        next.store(n);
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace neuronscope
