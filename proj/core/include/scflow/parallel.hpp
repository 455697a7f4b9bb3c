#pragma once

#include <cstddef>
#include <functional>

namespace scflow {

/// Worker cap: SCFLOW_THREADS if set to a positive integer, otherwise the
/// number of logical cores.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations must write to disjoint memory.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scflow
