#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sdu {

// Worker count used by parallel_for; 0 selects hardware concurrency.
void set_worker_count(unsigned n) noexcept;
unsigned worker_count() noexcept;

inline constexpr std::size_t kBlockSize = 1024;

// Calls fn(begin, end) over fixed-size blocks of [0, n). The block layout
// depends only on n and block, so per-index results never depend on the
// worker count. The first exception thrown (lowest block) is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t block = kBlockSize) {
    if (n == 0) return;
    const std::size_t n_blocks = (n + block - 1) / block;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n_blocks));
    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b * block, std::min(n, (b + 1) * block));
        return;
    }
    std::vector<std::exception_ptr> errors(n_blocks);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t b = w; b < n_blocks; b += workers) {
                try {
                    fn(b * block, std::min(n, (b + 1) * block));
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace sdu
