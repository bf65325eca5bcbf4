#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace fringeforge {

/// Worker cap: FRINGEFORGE_THREADS when set, hardware concurrency otherwise.
inline int worker_threads() {
    static const int cached = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("FRINGEFORGE_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        return hw;
    }();
    return cached;
}

/// Static-chunked parallel loop. Each index writes only its own outputs, so
/// results do not depend on scheduling.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
    const int workers = std::min<std::int64_t>(worker_threads(), n);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    auto run = [&](int worker) {
        for (std::int64_t i = worker; i < n; i += workers) body(i);
    };
    for (int t = 1; t < workers; ++t) pool.emplace_back(run, t);
    run(0);
    for (std::thread& t : pool) t.join();
}

}  // namespace fringeforge
