#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hyperfit {

/// Worker cap for map-style loops. Results are always reduced by the caller in index
/// order, so the outcome does not depend on the thread count.
struct Execution {
  unsigned threads = 1;
};

/// Calls fn(i) for i in [0, n). With threads > 1 indices are split into contiguous chunks.
/// The exception thrown at the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, const Execution& exec, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(exec.threads, 1u), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace hyperfit
