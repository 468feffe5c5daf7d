// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/numerics/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace MONOSPLAT_NS {

namespace {

int threads_from_env() {
    if (const char *env = std::getenv("MONOSPLAT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    return 1;
}

std::atomic<int> &thread_count() {
    static std::atomic<int> count{threads_from_env()};
    return count;
}

} // namespace

int num_threads() { return thread_count().load(); }

void set_num_threads(int n) { thread_count().store(std::max(1, n)); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)> &body) {
    const int workers = static_cast<int>(std::min<std::int64_t>(num_threads(), n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (std::int64_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(run);
    }
    run();
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace monosplat
