#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace peekstat::detail {

/// Runs fn(i) for i in [0, n) over `threads` workers, each taking one
/// contiguous block. Work items must write only to slots owned by their index,
/// so the outcome is independent of the worker count. The first exception
/// (lowest block) is rethrown after all workers join.
template <class Fn>
void parallel_for(std::uint64_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  const std::uint64_t workers = std::clamp<std::uint64_t>(threads == 0 ? 1 : threads, 1, n);
  if (workers == 1) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t begin = n * w / workers;
    const std::uint64_t end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::uint64_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace peekstat::detail
