#pragma once

#include <cstddef>
#include <functional>

namespace satrefine {

/// Worker count: SAT_REFINE_THREADS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to
/// worker_threads() threads. Chunk boundaries depend on the thread count, so
/// callers that need bit-stable results must not reduce across chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace satrefine
