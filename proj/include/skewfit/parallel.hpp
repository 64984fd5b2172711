#pragma once

#include <cstddef>
#include <functional>

namespace skewfit {

/// Worker cap: SKEWFIT_THREADS when set and positive, otherwise the hardware
/// concurrency (at least 1).
int worker_count();

/// Run fn(0..n-1) on up to worker_count() threads. Jobs must write to
/// disjoint outputs; the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace skewfit
