#ifndef INFOFLOW_PARALLEL_HPP
#define INFOFLOW_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace infoflow::parallel {

/// Process-wide worker count used by parallel_for (default 1).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/**
 * Calls body(begin, end) over contiguous chunks of [0, n). Every index is
 * processed by exactly one call and results must be written per index, so the
 * output does not depend on the worker count. Nested calls run serially.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)> &body);

} // namespace infoflow::parallel

#endif
