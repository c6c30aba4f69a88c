#pragma once

#include <cstddef>
#include <functional>

namespace stlmine {

/// Number of worker threads used by parallel_for. 0 restores the default
/// (hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(begin, end, worker) over [0, n) split into one static contiguous
/// chunk per worker. The chunking depends only on n and the worker count,
/// and callers are expected to write disjoint outputs, so results do not
/// depend on scheduling. Exceptions thrown by workers are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace stlmine
