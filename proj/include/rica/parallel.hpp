#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rica::par {

// Runtime thread-count knob (the CLI's --jobs). 0 means "library default".
void set_jobs(int jobs);
int jobs();

// Parallel loop over [0, n). Each index writes only to its own slots, so the
// result never depends on the thread count. The serial twin is kept as the
// reference implementation for the consistency tests and the benchmark.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);
void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& body);

// Block-deterministic sum of f(i) over [0, n): fixed-size blocks are reduced
// independently and then combined in block order, so the floating-point
// result is identical for any thread count (and identical to the serial twin).
inline constexpr std::size_t kSumBlock = 1024;

double block_sum(std::size_t n, const std::function<double(std::size_t)>& term);
double block_sum_serial(std::size_t n, const std::function<double(std::size_t)>& term);

}  // namespace rica::par
