#pragma once

#include <functional>

namespace closedlink {

/// Worker count from MECH_THREADS (unset or 0 = hardware concurrency).
int thread_count_from_env();

/// Runs body(0..count-1) on up to `threads` workers; results must be written
/// to pre-sized, index-addressed storage. The first exception is rethrown.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace closedlink
