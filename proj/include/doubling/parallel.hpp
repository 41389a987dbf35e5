#pragma once

#include <cstddef>
#include <functional>

namespace doubling {

/// Fixed chunk size for Monte Carlo index ranges; reductions combine chunks in index order.
inline constexpr std::size_t kChunkSize = 65536;

/// Worker cap from DOUBLING_LAB_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

/// Overrides the environment for the current process (0 restores the environment lookup).
void set_worker_count(unsigned workers);

/// Runs body(chunk_index, begin, end) for every chunk of [0, n), distributing chunks over workers.
/// Each chunk runs on exactly one worker; callers write per-chunk results into pre-sized slots.
void for_each_chunk(std::size_t n, std::size_t chunk,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace doubling
