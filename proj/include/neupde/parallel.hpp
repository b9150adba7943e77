#pragma once

#include <functional>

namespace neupde {

/// Resolves a thread count: `requested` > 0 wins, otherwise the
/// NEUPDE_THREADS environment variable (0 or unset = hardware concurrency).
int resolve_threads(int requested);

/// Runs fn(0..n-1), chunked over `threads` std::threads. Callers that need a
/// deterministic result must write into per-index slots and reduce in index
/// order afterwards.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace neupde
