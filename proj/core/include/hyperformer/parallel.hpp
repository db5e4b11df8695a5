#pragma once

#include <cstddef>
#include <functional>

namespace hyperformer {

/// Worker count: HYPERFORMER_THREADS if set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Calls fn(i) for i in [0, n), split into contiguous chunks across up to
/// thread_count() threads. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hyperformer
