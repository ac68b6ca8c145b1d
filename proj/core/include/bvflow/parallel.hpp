#pragma once

#include <cstddef>
#include <functional>

namespace bvflow {

/// Worker count from BVFLOW_THREADS, falling back to hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Results must be written to per-index slots so
/// that the outcome does not depend on scheduling. The first exception thrown
/// by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bvflow
