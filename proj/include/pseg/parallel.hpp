#pragma once

#include <cstddef>
#include <functional>

namespace pseg {

// Worker count resolution: explicit argument > PSEG_WORKERS env var >
// hardware concurrency.
int default_worker_count();

// Runs fn(i) for every i in [0, count), partitioned contiguously across
// workers. Each index must touch only its own output slots; results are then
// independent of the worker count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int workers = 0);

}  // namespace pseg
