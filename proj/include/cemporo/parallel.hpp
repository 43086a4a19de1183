#pragma once

#include <cstddef>
#include <functional>

namespace cem::parallel {

// Process-wide worker count used by parallel_for. Defaults to 1.
void set_threads(int n);
int threads();

/// Runs body(i) for i in [0, n). Tasks are handed out by index; each task
/// must only write to its own output slot so results never depend on the
/// schedule. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace cem::parallel
