#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace trfe {

/// Worker count: TRFE_THREADS if set (min 1), else hardware concurrency.
inline int max_workers() {
  if (const char* env = std::getenv("TRFE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
    return 1;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs body(i) for i in [0, n). Each call must touch only per-index state,
/// so results are identical for every worker count. If bodies throw, the
/// exception at the smallest index is rethrown (each chunk scans ascending,
/// so the minimum over chunk-first failures is the global first failure).
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const int workers = std::min<std::size_t>(max_workers(), n == 0 ? 1 : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  struct Failure {
    std::size_t index;
    std::exception_ptr error;
  };
  std::vector<Failure> failures(workers, Failure{n, nullptr});
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = static_cast<std::size_t>(w) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi, w] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          body(i);
        } catch (...) {
          failures[w] = Failure{i, std::current_exception()};
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  const Failure* first = nullptr;
  for (const auto& f : failures)
    if (f.error && (!first || f.index < first->index)) first = &f;
  if (first) std::rethrow_exception(first->error);
}

}  // namespace trfe
