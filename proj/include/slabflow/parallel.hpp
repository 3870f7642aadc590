#pragma once

#include <cstddef>
#include <functional>

namespace slabflow {

/// Worker cap: SLABFLOW_THREADS if set and positive, else hardware concurrency.
int worker_count();

/// Runs fn(0..n-1) over contiguous static chunks. Each index must be independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace slabflow
