#ifndef NSPVI_PARALLEL_HPP
#define NSPVI_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace nspvi {

// NSPVI_THREADS if set (>= 1), else the hardware concurrency.
int worker_count();

// Calls f(i) for i in [0, n) on up to worker_count() threads. Work is split
// into contiguous ranges; the exception thrown for the smallest index is
// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace nspvi

#endif  // NSPVI_PARALLEL_HPP
