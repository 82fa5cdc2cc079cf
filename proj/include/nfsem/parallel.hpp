#pragma once

#include <cstdint>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nfsem {

// Worker count: NFSEM_THREADS caps it, 0/unset means the OpenMP default.
int max_threads();
void set_threads(int n);

// Index of the calling worker inside a parallel_for body, in [0, max_threads).
inline int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

// Parallel map over [0, n). Every iteration must write to disjoint state;
// under that contract results are bit-identical for any thread count.
template <typename F>
void parallel_for(std::int64_t n, F&& body) {
  const int nt = max_threads();
  if (nt <= 1 || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::int64_t i = 0; i < n; ++i) body(i);
#else
  for (std::int64_t i = 0; i < n; ++i) body(i);
#endif
}

// Deterministic sum of f(i) over [0, n): fixed-size chunks are summed in
// parallel, then combined serially in chunk order. The result does not
// depend on the thread count.
template <typename F>
double deterministic_sum(std::int64_t n, F&& f) {
  constexpr std::int64_t kChunk = 4096;
  const std::int64_t nchunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
  parallel_for(nchunks, [&](std::int64_t c) {
    const std::int64_t lo = c * kChunk;
    const std::int64_t hi = lo + kChunk < n ? lo + kChunk : n;
    double s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(c)] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace nfsem
