#pragma once

#include <cstddef>
#include <functional>

namespace lsm {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs exactly once;
/// callers write results by index so the outcome does not depend on scheduling.
/// The first exception thrown by a body is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace lsm
