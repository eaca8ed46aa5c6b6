#pragma once

#include <cstddef>
#include <functional>

namespace mimi {

/// Calls body(i) for i in [0, n) on up to `threads` workers (0 means all
/// cores). Rethrows the exception of the lowest failing index after all
/// workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

int resolve_threads(int threads);

}  // namespace mimi
