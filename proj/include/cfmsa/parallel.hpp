#pragma once

#include <cstddef>
#include <functional>

namespace cfmsa {

// Worker count: CFMSA_THREADS if set to a positive integer, otherwise the
// hardware concurrency.
std::size_t thread_budget();

// Calls fn(i) for i in [0, n) across up to thread_budget() threads, each
// taking a contiguous chunk. fn must only write to per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cfmsa
