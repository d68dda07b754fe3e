#pragma once

#include <cstdint>
#include <functional>

namespace spamlens {

/// Worker-pool size used by parallel_for. 0 (the default) means "hardware
/// concurrency". Values are clamped to at least 1.
int max_threads();
void set_max_threads(int n);

/// Runs fn(begin..end) split into contiguous chunks across up to max_threads()
/// workers. Falls back to a plain loop when one worker suffices. fn must be
/// safe to call concurrently on disjoint index ranges.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace spamlens
