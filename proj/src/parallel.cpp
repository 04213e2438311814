#include "rica/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rica::par {

namespace {
std::atomic<int> g_jobs{0};
}

void set_jobs(int j) { g_jobs.store(j < 0 ? 0 : j); }

int jobs() {
  int j = g_jobs.load();
#ifdef _OPENMP
  if (j == 0) return omp_get_max_threads();
#endif
  return j == 0 ? 1 : j;
}

void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
  const int nt = jobs();
  if (nt > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for_each_index_serial(n, body);
}

double block_sum_serial(std::size_t n, const std::function<double(std::size_t)>& term) {
  const std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
  double total = 0.0;
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = b * kSumBlock;
    const std::size_t hi = lo + kSumBlock < n ? lo + kSumBlock : n;
    double part = 0.0;
    for (std::size_t i = lo; i < hi; ++i) part += term(i);
    total += part;
  }
  return total;
}

double block_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  const std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
#ifdef _OPENMP
  const int nt = jobs();
  if (nt > 1 && nblocks > 1) {
    std::vector<double> parts(nblocks, 0.0);
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * kSumBlock;
      const std::size_t hi = lo + kSumBlock < n ? lo + kSumBlock : n;
      double part = 0.0;
      for (std::size_t i = lo; i < hi; ++i) part += term(i);
      parts[static_cast<std::size_t>(b)] = part;
    }
    double total = 0.0;
    for (double p : parts) total += p;  // fixed combine order
    return total;
  }
#endif
  return block_sum_serial(n, term);
}

}  // namespace rica::par
