#pragma once

#include <cstddef>
#include <functional>

namespace tsirelson {

/// Worker count used when a call does not pass one explicitly. Initialized
/// from the WORKER_COUNT environment variable, else 1.
std::size_t default_workers();
void set_default_workers(std::size_t workers);

/**
 * Runs body(i) for i in [0, n) on up to `workers` threads.
 *
 * Indices are handed out in contiguous blocks; body must only write to
 * per-index storage. The first exception thrown by any worker is rethrown
 * on the calling thread after all workers join.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t workers = 0);

}  // namespace tsirelson
