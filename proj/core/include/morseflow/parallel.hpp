#pragma once

#include <cstddef>
#include <functional>

namespace morseflow {

/// Worker count: MORSEFLOW_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Run body(i) for i in [0, n) on up to worker_count() threads. Results must be
/// written to index-addressed slots so the outcome does not depend on scheduling.
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace morseflow
