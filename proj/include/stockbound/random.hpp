#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace stockbound {

/// SplitMix64 mix of (seed, stream). Used to give every chunk or replicate its
/// own generator state without overlapping sequences.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Standard normal variates from std::mt19937_64 via Box-Muller. A (seed,
/// stream) pair yields the same sequence with any standard library.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed, std::uint64_t stream = 0);

    /// Uniform on (0, 1].
    double uniform() noexcept;
    double normal() noexcept;

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Monte Carlo work is split into chunks of this many trials, each seeded with
/// derive_seed(seed, chunk). Results are merged in chunk order.
inline constexpr std::size_t kChunkTrials = std::size_t{1} << 16;

std::size_t worker_count(std::size_t chunks) noexcept;

/// Calls body(chunk, begin, end) for every chunk of [0, trials) and returns the
/// per-chunk results in chunk order. Chunks may run on several threads; the
/// output does not depend on the schedule.
template <class Result, class Body>
std::vector<Result> run_chunked(std::size_t trials, Body&& body) {
    const std::size_t chunks = (trials + kChunkTrials - 1) / kChunkTrials;
    std::vector<Result> results(chunks);
    auto work = [&](std::atomic<std::size_t>& next) {
        for (std::size_t c = next++; c < chunks; c = next++) {
            const std::size_t begin = c * kChunkTrials;
            const std::size_t end = std::min(trials, begin + kChunkTrials);
            results[c] = body(c, begin, end);
        }
    };
    std::atomic<std::size_t> next{0};
    const std::size_t workers = worker_count(chunks);
    if (workers <= 1) {
        work(next);
        return results;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([&] { work(next); });
    for (auto& t : pool) t.join();
    return results;
}

}  // namespace stockbound
