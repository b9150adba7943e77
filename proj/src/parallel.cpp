#include "neupde/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace neupde {

#ifdef __GLIBC__
// The training hot loops allocate and free many multi-hundred-KB buffers;
// with glibc's default trim/mmap thresholds most of that traffic becomes
// syscalls. Keeping such blocks cached in the arena roughly halves the
// wall time of the PDE experiments.
namespace {
const int malloc_tuned = [] {
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  return 0;
}();
}  // namespace
#endif

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NEUPDE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace neupde
