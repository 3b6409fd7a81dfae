#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cubekit {

/// Runs fn(i) for i in [0, n) on at most `parallelism` threads. If any call
/// throws, the exception with the lowest index is rethrown after all workers
/// finish, so failures are reported deterministically.
template <typename Fn>
void bounded_parallel_for(std::size_t n, std::size_t parallelism, Fn&& fn) {
  if (n == 0) return;
  parallelism = std::clamp<std::size_t>(parallelism, 1, n);
  std::vector<std::exception_ptr> errors(n);
  if (parallelism == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(parallelism);
    for (std::size_t w = 0; w < parallelism; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cubekit
