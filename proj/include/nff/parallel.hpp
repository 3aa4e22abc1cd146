#pragma once

#include <cstddef>
#include <functional>

namespace nff {

/// Worker cap: NFF_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers = worker_count());

/// Pairwise (tree) sum; the result depends only on the order of `values`.
double pairwise_sum(const double* values, std::size_t n);

}  // namespace nff
