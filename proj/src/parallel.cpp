#include "driftless/parallel.hpp"

#include <atomic>

namespace driftless {

namespace {
std::atomic<std::size_t> g_threads{1};
}

std::size_t thread_count() noexcept { return g_threads.load(); }
void set_thread_count(std::size_t n) noexcept { g_threads.store(n == 0 ? 1 : n); }

}  // namespace driftless
