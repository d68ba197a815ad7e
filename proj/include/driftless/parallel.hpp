#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace driftless {

// Worker count used by parallel_chunks; 1 by default.
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

// Runs fn(chunk, begin, end) for fixed chunks of [0, n). Chunk boundaries
// depend only on n and chunk_size, never on the worker count, so callers
// that reduce per-chunk results in chunk order get bit-identical output for
// any number of threads.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, Fn&& fn) {
    const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
    auto run = [&](std::size_t c) { fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size)); };
    const std::size_t workers = std::min(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < chunks; c += workers) run(c);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) { return (n + chunk_size - 1) / chunk_size; }

}  // namespace driftless
