#pragma once

#include <cstddef>
#include <functional>

namespace optable {

/// Runs fn(i) for every i in [0, count) on up to `threads` workers. Work is
/// handed out by index, so callers that write results to slot i get output
/// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace optable
