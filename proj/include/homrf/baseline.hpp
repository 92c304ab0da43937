#pragma once

#include <Eigen/Core>
#include <vector>

#include "homrf/solver.hpp"

namespace homrf {

// Fractional local-polytope candidate: per-node and per-clique beliefs.
struct PrimalPoint {
  std::vector<Eigen::VectorXd> node_beliefs;
  std::vector<Eigen::VectorXd> clique_beliefs;  // dense tables, clique domain order
  double feasibility_residual = 0.0;  // max |sum_{x_c \ i} phi_c - phi_i|

  bool feasible() const { return feasibility_residual <= 1e-8; }
};

// argmax of each node marginal; ties take the smallest label.
Labeling round_primal(const MarginalCache& marginals);

// Reweight-and-correct feasible recovery from the softmin marginals.
// Requires node marginals, clique-node marginals and full clique beliefs.
PrimalPoint recover_feasible_primal(const MrfModel& model, const DualLayout& layout,
                                    const MarginalCache& marginals);

struct PdGap {
  double nonsmooth = 0.0;  // primal LP objective - non-smooth dual
  double smooth = 0.0;     // entropy-corrected objective - smooth dual
  double primal_objective = 0.0;
  double nonsmooth_dual = 0.0;
};

PdGap pd_gap(const MrfModel& model, const Decomposition& decomposition, const DualLayout& layout,
             const Eigen::VectorXd& delta, const PrimalPoint& primal, double tau);

// Monotone FISTA with backtracking Lipschitz estimation inside the same
// annealing and exit machinery as the Newton solvers.
SolveReport fista_solve(const MrfModel& model, const Decomposition& decomposition,
                        const TrnConfig& config, const IterationObserver& observer = {});

}  // namespace homrf
