#pragma once

#include <cstddef>
#include <functional>

namespace trixlab {

// Worker count: TRIXLAB_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Overrides the environment for the current process; 0 restores the default.
void set_worker_count(std::size_t n);

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each, one
// chunk per worker. fn must only touch state owned by its range.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace trixlab
