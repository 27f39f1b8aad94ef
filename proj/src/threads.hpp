#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lexchain {

// Worker count: LEXCHAIN_THREADS if set, otherwise the hardware count,
// clamped to [1, 16].
inline int default_thread_count() {
    if (const char *env = std::getenv("LEXCHAIN_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n > 16 ? 16 : n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return hw > 16 ? 16 : static_cast<int>(hw);
}

// Static contiguous partition of [0, n) into at most n_threads slices.
// fn(slice, begin, end) runs on its own thread; exceptions are rethrown
// in slice order after the join, so failures surface deterministically.
inline void parallel_slices(size_t n, int n_threads,
                            const std::function<void(int, size_t, size_t)> &fn) {
    if (n == 0) return;
    size_t slices = static_cast<size_t>(n_threads) < n ? static_cast<size_t>(n_threads) : n;
    if (slices <= 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(slices);
    size_t chunk = (n + slices - 1) / slices;
    for (size_t s = 0; s < slices; ++s) {
        size_t begin = s * chunk;
        size_t end = begin + chunk < n ? begin + chunk : n;
        workers.emplace_back([&fn, &errors, s, begin, end] {
            try {
                fn(static_cast<int>(s), begin, end);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto &w : workers) w.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace lexchain
