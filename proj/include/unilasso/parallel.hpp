#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace unilasso {

/// Runs body(k) for k in [0, count) on up to `threads` workers. Every index
/// writes only its own output slot, so results do not depend on the worker
/// count. The first exception thrown (lowest index) is rethrown.
template <class Body>
void parallel_for(long count, int threads, Body&& body) {
    const long workers = std::min<long>(std::max(threads, 1), count);
    if (workers <= 1) {
        for (long k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<long> next{0};
    std::mutex err_mutex;
    long err_index = count;
    std::exception_ptr err;
    auto run = [&] {
        for (long k = next++; k < count; k = next++) {
            try {
                body(k);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (k < err_index) {
                    err_index = k;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (long w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

/// Thread count from UNILASSO_THREADS, or 1.
inline int default_threads() {
    if (const char* env = std::getenv("UNILASSO_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

}  // namespace unilasso
