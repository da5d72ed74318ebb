#pragma once

#include <functional>

namespace ftmpc {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items are
/// handed out in index order; callers write results into per-index slots so
/// the outcome does not depend on scheduling. The first exception thrown by
/// any item is rethrown after all threads join.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace ftmpc
