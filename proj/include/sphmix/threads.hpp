#pragma once

#include <cstddef>
#include <functional>

namespace sphmix {

// Worker count: SPHMIX_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
unsigned thread_budget();

// Runs fn(i) for every i in [0, n). Work items must be independent and write
// only to their own slots; under that contract the result is identical for
// any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sphmix
