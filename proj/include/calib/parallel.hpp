#pragma once

#include <cstddef>
#include <functional>

namespace calib {

/// Worker count: CALIB_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
unsigned thread_count();

/// Runs body(i) for i in [0, count) on up to thread_count() threads. Work items
/// are claimed dynamically, so body must write only to slot i of its output.
/// The first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace calib
