#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kme::par {

// Reductions are chunked by index so the summation order is fixed by the
// problem size alone. Results are bit-identical for any thread count,
// including the serial fallback used when the work is too small to split.
inline constexpr std::size_t chunk_size = 1024;
inline constexpr std::size_t min_parallel_work = 16384;

inline std::size_t num_chunks(std::size_t n) {
  return (n + chunk_size - 1) / chunk_size;
}

/// work: rough number of inner operations (defaults to the item count).
inline bool should_parallelize(std::size_t work) {
#ifdef _OPENMP
  return work >= min_parallel_work && omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

/// Sum of f(i) for i in [0, n), deterministic chunked reduction.
template <class F>
double sum(std::size_t n, F&& f, std::size_t work = 0) {
  if (n == 0) return 0.0;
  const std::size_t nc = num_chunks(n);
  if (nc == 1) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += f(i);
    return acc;
  }
  std::vector<double> partial(nc, 0.0);
  const bool par = should_parallelize(work ? work : n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (long long c = 0; c < static_cast<long long>(nc); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk_size;
    const std::size_t hi = lo + chunk_size < n ? lo + chunk_size : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += f(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  (void)par;
  double total = 0.0;
  for (std::size_t c = 0; c < nc; ++c) total += partial[c];
  return total;
}

/// Accumulates width-sized contributions: f(i, acc) must add into acc[0..width).
/// out[0..width) is overwritten with the chunk-ordered total.
template <class F>
void sum_arrays(std::size_t n, std::size_t width, double* out, F&& f,
                std::size_t work = 0) {
  for (std::size_t k = 0; k < width; ++k) out[k] = 0.0;
  if (n == 0 || width == 0) return;
  const std::size_t nc = num_chunks(n);
  if (nc == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, out);
    return;
  }
  std::vector<double> partial(nc * width, 0.0);
  const bool par = should_parallelize(work ? work : n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (long long c = 0; c < static_cast<long long>(nc); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk_size;
    const std::size_t hi = lo + chunk_size < n ? lo + chunk_size : n;
    double* acc = partial.data() + static_cast<std::size_t>(c) * width;
    for (std::size_t i = lo; i < hi; ++i) f(i, acc);
  }
  (void)par;
  for (std::size_t c = 0; c < nc; ++c) {
    const double* acc = partial.data() + c * width;
    for (std::size_t k = 0; k < width; ++k) out[k] += acc[k];
  }
}

/// Element-wise parallel loop, no reduction.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t work = 0) {
  const bool par = should_parallelize(work ? work : n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    f(static_cast<std::size_t>(i));
  }
  (void)par;
}

}  // namespace kme::par
