#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace autoforge::util {

// Runs fn(i) for i in [0, count). With max_workers <= 1 execution is strictly
// sequential in index order; otherwise up to max_workers threads pull indices
// from a shared counter. The first exception thrown by any worker is rethrown
// after all workers join.
inline void parallel_for(std::size_t count, int max_workers,
                         const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (max_workers <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                break;
            }
        }
    };

    std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(max_workers));
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace autoforge::util
