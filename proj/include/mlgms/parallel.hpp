#pragma once

// Index-parallel loops with a static, schedule-independent partition. Each
// index writes only its own output slot, so results do not depend on the
// worker count.

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mlgms {

/// Calls fn(i) for i in [0, n). workers <= 1 runs inline. The first exception
/// (lowest index among those observed) is rethrown after all workers join.
template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    if (n <= 0) return;
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::exception_ptr err;
    int err_index = n;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (i < err_index) {
                        err_index = i;
                        err = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline int hardware_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

} // namespace mlgms
