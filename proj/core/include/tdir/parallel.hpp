#pragma once

#include <cstddef>
#include <functional>

namespace tdir {

/// Runs fn(i) for i in [0, n) on at most `threads` workers. Work items must
/// write to disjoint outputs; callers reduce results in index order so the
/// outcome does not depend on the worker count. The first exception thrown
/// by any item is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace tdir
