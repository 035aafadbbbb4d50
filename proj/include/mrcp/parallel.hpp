#pragma once

#include <cstddef>
#include <functional>

namespace mrcp {

/// Worker cap from the MRCP_THREADS environment variable (0 or unset means
/// hardware concurrency). Always at least 1.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// is visited exactly once; callers write results into per-index slots so
/// the outcome does not depend on scheduling. If bodies throw, the exception
/// from the lowest failing index is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mrcp
