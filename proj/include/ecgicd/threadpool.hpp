#ifndef ECGICD_THREADPOOL_HPP
#define ECGICD_THREADPOOL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ecgicd {

/// Run fn(i) for i in [0, n) on up to n_threads threads.
///
/// Work items are claimed from a shared atomic counter; callers that need
/// deterministic output write into preallocated slot i, so the result is
/// independent of scheduling. n_threads <= 1 runs inline.
inline void parallel_for(std::size_t n, unsigned n_threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (n_threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (n_threads > n) n_threads = static_cast<unsigned>(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace ecgicd

#endif
