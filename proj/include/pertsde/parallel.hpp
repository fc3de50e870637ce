#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pertsde {

/// Evaluates fn(0..n-1) on a pool of threads; result j lands in slot j, so the
/// output is independent of scheduling. The first exception is rethrown.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, Fn&& fn, unsigned workers = 0) {
    std::vector<Result> out(n);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < n; j = next++) {
            try {
                out[j] = fn(j);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace pertsde
