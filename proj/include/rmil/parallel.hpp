// Deterministic fork-join helpers. Work is split into contiguous index
// blocks with a static partition; every datum is written to a caller-owned
// slot, so results are independent of the worker count and schedule.

#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace rmil {

/// Runs fn(lo, hi) over a static partition of [0, count) using up to
/// `workers` threads. fn must only write to disjoint, index-owned state.
inline void parallel_for_blocks(int count, int workers, const std::function<void(int, int)>& fn) {
  if (count <= 0) return;
  if (workers > count) workers = count;
  if (workers <= 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(count) * w / workers);
    const int hi = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    threads.emplace_back([&, w, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Runs fn(i) for i in [0, count) with a static block partition.
inline void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  parallel_for_blocks(count, workers, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace rmil
