#pragma once

#include <cstddef>
#include <functional>

namespace subreg {

/// Worker count: SUBREG_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
unsigned thread_budget();

/// Runs fn(i) for i in [0, n) on up to thread_budget() threads. Each index is
/// handled exactly once; the first exception thrown is rethrown after all
/// workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace subreg
