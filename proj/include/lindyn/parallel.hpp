#ifndef LINDYN_PARALLEL_HPP
#define LINDYN_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace lindyn {

/// Worker count: LINDYN_THREADS if set and positive, otherwise hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so callers
/// that write only to slot i get results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lindyn

#endif  // LINDYN_PARALLEL_HPP
