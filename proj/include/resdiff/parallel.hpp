#pragma once

#include <cstddef>
#include <functional>

namespace resdiff {

/// Worker count used by the parallel kernels (bootstrap replicates,
/// coverage rows). Defaults to 1. Results never depend on it.
int thread_count();
void set_thread_count(int n);

/// Calls fn(begin, end) on contiguous chunks of [0, n), one per worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace resdiff
