#ifndef OATK_PARALLEL_HPP
#define OATK_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace oatk {

inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs f(i) for i in [begin, end). Each index must be independent and write
// only to its own output slot; results are then identical for any thread
// count. The first exception thrown by any worker is rethrown.
template <typename F>
void parallel_for(long begin, long end, int threads, F&& f) {
    const long count = end - begin;
    if (count <= 0) {
        return;
    }
    threads = std::min<long>(resolve_threads(threads), count);
    if (threads <= 1) {
        for (long i = begin; i < end; ++i) {
            f(i);
        }
        return;
    }

    std::mutex err_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (long i = begin + t; i < end; i += threads) {
                    f(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace oatk

#endif
