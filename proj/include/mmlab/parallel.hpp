#pragma once

#include <functional>

namespace mmlab {

// Episode-level worker count: MM_SIM_THREADS env var, 0 or unset-as-0 means
// auto (hardware concurrency). Episodes are seed-indexed and write disjoint
// slots, so results are identical for any thread count.
int resolve_threads();

// Runs fn(0..n-1) across resolve_threads() workers.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace mmlab
