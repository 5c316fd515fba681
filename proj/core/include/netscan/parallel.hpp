#pragma once

#include <cstddef>
#include <functional>

namespace netscan {

// Resolves a requested worker count. 0 means "auto": the NETSCAN_THREADS
// environment variable if set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested);

// Splits [0, n) into at most `threads` contiguous ranges and runs body(first,
// last) on each, one range on the calling thread. The split depends only on
// (n, threads). The first exception thrown by any range is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace netscan
