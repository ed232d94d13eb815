#pragma once

#include <cstddef>
#include <functional>

namespace hjlab {

// Runs body(i) for i in [0, count) on up to `workers` threads. Work is
// split into contiguous blocks; callers write results into slot i only, so
// the outcome does not depend on the worker count.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

int default_workers();

}  // namespace hjlab
