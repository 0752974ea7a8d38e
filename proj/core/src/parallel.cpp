#include "lvmi/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lvmi {

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("LVMI_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_chunks(int n_items, int workers, const std::function<void(int, int, int, int)>& fn) {
    const int n_chunks = chunk_count(n_items);
    workers = resolve_workers(workers);
    if (workers > n_chunks) workers = n_chunks;

    if (workers <= 1) {
        for (int c = 0; c < n_chunks; ++c) {
            const int begin = c * kChunkSize;
            const int end = std::min(n_items, begin + kChunkSize);
            fn(0, c, begin, end);
        }
        return;
    }

    std::atomic<int> cursor{0};
    std::mutex err_mutex;
    int first_err_chunk = -1;
    std::exception_ptr first_err;

    auto body = [&](int worker) {
        for (;;) {
            const int c = cursor.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) break;
            const int begin = c * kChunkSize;
            const int end = std::min(n_items, begin + kChunkSize);
            try {
                fn(worker, c, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_err_chunk < 0 || c < first_err_chunk) {
                    first_err_chunk = c;
                    first_err = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(body, t);
    body(0);
    for (auto& th : pool) th.join();

    if (first_err) std::rethrow_exception(first_err);
}

}  // namespace lvmi
