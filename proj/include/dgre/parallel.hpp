#pragma once

#include <functional>

namespace dgre {

// Process-wide worker count for the coarse parallel loops. 1 (the default)
// runs everything inline on the calling thread.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n) split across thread_count() workers in
// contiguous chunks. Callers guarantee disjoint writes per index.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace dgre
