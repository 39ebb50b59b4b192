#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace ctopt {

/// Runs fn(i) for i in [begin, end) on up to `threads` workers (0 = hardware
/// concurrency). Each index is processed exactly once; callers must write to
/// disjoint outputs, which keeps results independent of the thread count.
inline void parallel_for(int begin, int end, int threads, const std::function<void(int)>& fn) {
    const int n = end - begin;
    if (n <= 0) {
        return;
    }
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, n);
    if (workers == 1) {
        for (int i = begin; i < end; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([=, &fn] {
            for (int i = begin + w; i < end; i += workers) {
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

} // namespace ctopt
