#pragma once

// Internal Algorithm-1 loop shared by the exact-Hessian and quasi-Newton
// solvers. Not installed; include from src only.

#include <chrono>
#include <cmath>

#include "homrf/baseline.hpp"
#include "homrf/errors.hpp"
#include "homrf/krylov.hpp"
#include "homrf/parallel.hpp"
#include "homrf/solver.hpp"

namespace homrf::detail {

class NewtonStrategy {
 public:
  virtual ~NewtonStrategy() = default;
  virtual MarginalRequest marginal_request() const = 0;
  virtual void at_new_point(const GradientResult& gr, double tau) = 0;
  virtual void on_anneal() {}
  virtual void on_accept(const Eigen::VectorXd& /*step*/, const Eigen::VectorXd& /*grad_old*/,
                         const Eigen::VectorXd& /*grad_new*/) {}
  virtual CgReport direction(const Eigen::VectorXd& grad, double lambda, double eta,
                             int cg_max) = 0;
  virtual const HessianBlocks* blocks() const { return nullptr; }
};

SolveReport run_newton_loop(const MrfModel& model, const Decomposition& decomposition,
                            const TrnConfig& config, const IterationObserver& observer,
                            NewtonStrategy& strategy, const char* solver_name);

// Shared by all solvers: nonsmooth dual, rounding, feasible recovery.
void finalize_report(SolveReport& report, const MrfModel& model,
                     const Decomposition& decomposition, const DualLayout& layout,
                     const Eigen::VectorXd& delta, const MarginalCache& marginals, double tau,
                     double f, long long& oracle_calls);

// One PD-gap certification at the current point; +1 oracle call.
// Returns the non-smooth gap, or +inf when the primal cannot be materialized.
double pd_gap_probe(const MrfModel& model, const Decomposition& decomposition,
                    const DualLayout& layout, const Eigen::VectorXd& delta, double tau,
                    bool& capacity_ok);

}  // namespace homrf::detail
