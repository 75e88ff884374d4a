#pragma once

#include <cstddef>
#include <functional>

namespace pdw {

// Worker count: WORKBENCH_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
// processed exactly once; callers write results into per-index slots so the
// outcome never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pdw
