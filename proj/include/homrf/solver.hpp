#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "homrf/smooth_dual.hpp"

namespace homrf {

struct HessianBlocks;

// Algorithm parameters. Defaults are the paper-prescribed experiment values;
// eps_tau follows the annealing schedule (see eps_tau_for).
struct TrnConfig {
  double lambda0 = 1.0;
  double alpha = 2.0;       // tau growth factor
  double beta = 1.0 / 6.0;  // anneal threshold fraction
  double eps_rho = 1e-4;    // below this, backtrack along p
  double zeta = 1e-3;       // gradient infinity-norm exit
  double tau0 = 1.0;
  double tau_max = 8192.0;  // 2^13
  int cg_max = 250;
  int max_outer = 100000;       // safety stop
  int pd_gap_every = 20;        // PD-gap exit cadence, 0 disables
  double pd_gap_tol = 1e-4;     // non-smooth gap certifying convergence
  int lbfgs_memory = 10;        // qn only
  int threads = 1;
  bool wall_clock = false;      // real wall_ms in traces (breaks bit-identity)

  void validate() const;
};

// 0.1 / 0.01 / 0.001 as tau crosses tau_max/4 and tau_max/2
double eps_tau_for(double tau, double tau_max);

enum class TraceEvent { step, anneal, exit_grad, exit_pdgap, backtrack };

const char* trace_event_name(TraceEvent e);

struct TraceRow {
  long long oracle_calls = 0;
  double wall_ms = 0.0;
  double tau = 0.0;
  double lambda = 0.0;
  double f = 0.0;
  double grad_l2 = 0.0;
  double grad_linf = 0.0;
  int cg_iters = 0;
  TraceEvent event = TraceEvent::step;
};

std::string trace_csv_header();
std::string trace_row_csv(const TraceRow& row);

// Per-row callback for tests and tooling. Pointers are valid only during
// the call. blocks is null for solvers without an exact Hessian.
struct IterationInfo {
  TraceRow row;
  double rho = 0.0;            // acceptance ratio of this step (step rows)
  double lambda_before = 0.0;  // damping used in the step's linear system
  double lambda_after = 0.0;   // damping after the adaptation table
  double eta = 0.0;            // CG forcing tolerance
  const Eigen::VectorXd* delta = nullptr;
  const Eigen::VectorXd* grad = nullptr;
  const MarginalCache* marginals = nullptr;
  const HessianBlocks* blocks = nullptr;
  double tau = 0.0;
};

using IterationObserver = std::function<void(const IterationInfo&)>;

struct SolveReport {
  std::string solver;
  std::string exit_reason;  // exit-grad | exit-pdgap | max-iter
  Eigen::VectorXd delta;
  std::vector<TraceRow> trace;
  Labeling labeling;            // rounded integer primal
  double smooth_dual = 0.0;     // g_tau at exit
  double nonsmooth_dual = 0.0;  // Eq. 3 value at exit
  double integer_primal = 0.0;  // energy of the rounded labeling
  double nonsmooth_primal = 0.0;  // LP objective of the recovered feasible point
  double feasibility_residual = 0.0;
  bool primal_recovered = false;  // false when clique beliefs exceeded the cap
  long long oracle_calls = 0;
  int iterations = 0;
  double wall_seconds = 0.0;
  double final_tau = 0.0;
};

// Mutable solver state (Algorithm 1 bookkeeping).
struct TrnState {
  Eigen::VectorXd delta;
  double tau = 1.0;
  double lambda = 1.0;
  double gamma_tau = 0.0;  // anneal trigger threshold
  double eps_tau = 0.1;
  int k = 0;               // outer iteration
  double last_rho = 0.0;
  std::vector<TraceRow> trace;
};

// rho = (f_new - f_old) / (q(p) - q(0)); non-negative predicted decrease
// degenerates to 0.
double acceptance_ratio(double f_old, double f_new, double predicted_decrease);

// Eq.-style table: <0.25 double, <0.5 keep, <0.9 halve, else quarter.
double update_lambda(double lambda, double rho);

struct BacktrackResult {
  double t = 0.0;
  double f_t = 0.0;
  int evaluations = 0;
};

// Armijo backtracking with cubic interpolation; tries t = 1 first,
// safeguards each trial into [0.1 t, 0.5 t], gives up after max_trials.
BacktrackResult cubic_backtrack(const std::function<double(double)>& f_eval, double f0,
                                double slope0, double c1 = 1e-4, int max_trials = 20);

// Anneal trigger of Algorithm 1. The new gamma_tau is set from the gradient
// norm re-evaluated at the new tau, so callers re-evaluate in between.
bool should_anneal(double grad_l2, double tau, double gamma_tau, const TrnConfig& config);

}  // namespace homrf
