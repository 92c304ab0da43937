#pragma once

#include <cstddef>
#include <functional>

namespace homrf {

// Process-wide worker count for parallel_for. 1 (the default) runs inline.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n) split into contiguous chunks, one chunk per
// worker. Callers must write only to disjoint output slots and do any
// reduction serially afterwards; that is what makes results independent of
// the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace homrf
