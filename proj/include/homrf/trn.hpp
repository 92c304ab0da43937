#pragma once

#include "homrf/hessian.hpp"
#include "homrf/solver.hpp"

namespace homrf {

// Trust-region Newton with the exact structured Hessian and clique-block
// preconditioner. Requires a singleton-clique decomposition (pair marginals).
SolveReport trn_solve(const MrfModel& model, const Decomposition& decomposition,
                      const TrnConfig& config, const IterationObserver& observer = {});

}  // namespace homrf
