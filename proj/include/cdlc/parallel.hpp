#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace cdlc {

/// Runs fn(begin, end) over contiguous shards of [0, n). Workers must write
/// disjoint outputs; every reduction stays with the caller so results do not
/// depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t shards = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(shards - 1);
    const std::size_t base = n / shards, rem = n % shards;
    std::size_t begin = 0;
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t end = begin + base + (s < rem ? 1 : 0);
        if (s + 1 == shards) {
            fn(begin, end);
        } else {
            pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        }
        begin = end;
    }
    for (auto& t : pool) t.join();
}

} // namespace cdlc
