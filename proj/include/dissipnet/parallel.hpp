#pragma once

// Index-parallel loops with a serial reference path. Work items write to
// their own slots; reductions happen afterwards in index order, so both paths
// give bit-identical results.

#include <cstddef>
#include <exception>
#include <vector>

namespace dissipnet {

enum class Exec { serial, parallel };

int worker_count();

// Calls fn(i) for i in [0, count). If any call throws, the exception of the
// lowest failing index is rethrown after the loop.
template <class Fn>
void for_each_index(std::size_t count, Exec exec, Fn&& fn) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dissipnet
