#include "nfsem/parallel.hpp"

#include <atomic>
#include <string>

namespace nfsem {

namespace {

int env_thread_cap() {
  const char* s = std::getenv("NFSEM_THREADS");
  if (!s || !*s) return 0;
  const int v = std::atoi(s);
  return v > 0 ? v : 0;
}

std::atomic<int> g_threads{-1};  // -1 = uninitialized

}  // namespace

int max_threads() {
  int t = g_threads.load(std::memory_order_relaxed);
  if (t < 0) {
#ifdef _OPENMP
    int hw = omp_get_max_threads();
#else
    int hw = 1;
#endif
    const int cap = env_thread_cap();
    t = (cap > 0 && cap < hw) ? cap : hw;
    g_threads.store(t, std::memory_order_relaxed);
  }
  return t;
}

void set_threads(int n) { g_threads.store(n > 0 ? n : 1, std::memory_order_relaxed); }

}  // namespace nfsem
