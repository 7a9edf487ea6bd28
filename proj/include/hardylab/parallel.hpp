#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hardylab {

inline unsigned& worker_count() {
    static unsigned n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

inline void set_worker_count(unsigned n) { worker_count() = std::max(1u, n); }

/// Runs f(i) for i in [0, n). Work is claimed in contiguous blocks via an
/// atomic cursor; f must only write to state owned by index i.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t block = 16) {
    const unsigned workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (;;) {
            const std::size_t begin = cursor.fetch_add(block);
            if (begin >= n || failed.load(std::memory_order_relaxed)) return;
            const std::size_t end = std::min(n, begin + block);
            try {
                for (std::size_t i = begin; i < end; ++i) f(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned spawned = static_cast<unsigned>(
        std::min<std::size_t>(workers - 1, (n + block - 1) / block));
    pool.reserve(spawned);
    for (unsigned t = 0; t < spawned; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace hardylab
