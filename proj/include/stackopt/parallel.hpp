#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace stackopt {

// Every data-parallel kernel in the library takes an Exec argument. Serial is
// the reference path kept for tests and benchmarks; Parallel distributes the
// same per-index work over OpenMP threads. Each index writes only its own
// output slot and floating-point reductions happen serially afterwards, so
// both paths produce bit-identical results.
enum class Exec { Serial, Parallel };

inline int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Calls body(i) for i in [0, n). If any call throws, the exception from the
/// lowest failing index is rethrown after the loop, matching serial order.
template <class Body>
void for_each_index(Exec exec, std::ptrdiff_t n, Body&& body) {
  if (exec == Exec::Serial || n < 2) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  std::ptrdiff_t first_idx = std::numeric_limits<std::ptrdiff_t>::max();
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (i < first_idx) {
        first_idx = i;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace stackopt
