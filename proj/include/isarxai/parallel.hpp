#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace isarxai {

// Worker count used by parallel_for. Resolution order: explicit set_thread_count
// (the CLI --threads flag), the ISARXAI_THREADS environment variable, then
// hardware concurrency.
inline int& thread_count_storage() {
    static int n = [] {
        if (const char* env = std::getenv("ISARXAI_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? static_cast<int>(hc) : 1;
    }();
    return n;
}

inline int thread_count() { return thread_count_storage(); }
inline void set_thread_count(int n) {
    if (n >= 1) thread_count_storage() = n;
}

// Static contiguous partition of [begin, end) over the active worker count.
// Every index is owned by exactly one worker and workers share no mutable
// state, so results are bitwise independent of the worker count. Callers that
// need a reduction collect per-index (or per-chunk) outputs and combine them
// in index order afterwards.
template <typename Fn>
void parallel_for(size_t begin, size_t end, Fn&& fn) {
    if (end <= begin) return;
    size_t count = end - begin;
    int workers = thread_count();
    if (workers < 2 || count < 2) {
        for (size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    size_t n_chunks = std::min<size_t>(static_cast<size_t>(workers), count);
    size_t chunk = count / n_chunks;
    size_t extra = count % n_chunks;
    std::vector<std::thread> pool;
    pool.reserve(n_chunks - 1);
    size_t start = begin;
    for (size_t c = 0; c < n_chunks; ++c) {
        size_t len = chunk + (c < extra ? 1 : 0);
        size_t stop = start + len;
        if (c == n_chunks - 1) {
            for (size_t i = start; i < stop; ++i) fn(i);
        } else {
            pool.emplace_back([start, stop, &fn] {
                for (size_t i = start; i < stop; ++i) fn(i);
            });
        }
        start = stop;
    }
    for (auto& t : pool) t.join();
}

}  // namespace isarxai
