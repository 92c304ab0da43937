#include "homrf/solver.hpp"

#include <cmath>
#include <sstream>

#include "homrf/errors.hpp"
#include "homrf/model.hpp"

namespace homrf {

void TrnConfig::validate() const {
  require(lambda0 > 0, ErrorKind::invalid_input, "lambda0 must be positive");
  require(alpha > 1, ErrorKind::invalid_input, "alpha must exceed 1");
  require(beta > 0, ErrorKind::invalid_input, "beta must be positive");
  require(eps_rho > 0, ErrorKind::invalid_input, "eps_rho must be positive");
  require(zeta > 0, ErrorKind::invalid_input, "zeta must be positive");
  require(tau0 > 0, ErrorKind::invalid_input, "tau0 must be positive");
  require(tau_max >= tau0, ErrorKind::invalid_input, "tau_max must be >= tau0");
  require(cg_max >= 1, ErrorKind::invalid_input, "cg_max must be >= 1");
  require(max_outer >= 1, ErrorKind::invalid_input, "max_outer must be >= 1");
  require(pd_gap_every >= 0, ErrorKind::invalid_input, "pd_gap_every must be >= 0");
  require(pd_gap_tol > 0, ErrorKind::invalid_input, "pd_gap_tol must be positive");
  require(lbfgs_memory >= 1, ErrorKind::invalid_input, "lbfgs_memory must be >= 1");
  require(threads >= 1, ErrorKind::invalid_input, "threads must be >= 1");
}

double eps_tau_for(double tau, double tau_max) {
  if (tau < tau_max / 4) return 0.1;
  if (tau < tau_max / 2) return 0.01;
  return 0.001;
}

const char* trace_event_name(TraceEvent e) {
  switch (e) {
    case TraceEvent::step: return "step";
    case TraceEvent::anneal: return "anneal";
    case TraceEvent::exit_grad: return "exit-grad";
    case TraceEvent::exit_pdgap: return "exit-pdgap";
    case TraceEvent::backtrack: return "backtrack";
  }
  return "?";
}

std::string trace_csv_header() {
  return "oracle_calls,wall_ms,tau,lambda,f,grad_l2,grad_linf,cg_iters,event";
}

std::string trace_row_csv(const TraceRow& row) {
  std::ostringstream out;
  out << row.oracle_calls << ',' << format_double(row.wall_ms) << ',' << format_double(row.tau)
      << ',' << format_double(row.lambda) << ',' << format_double(row.f) << ','
      << format_double(row.grad_l2) << ',' << format_double(row.grad_linf) << ',' << row.cg_iters
      << ',' << trace_event_name(row.event);
  return out.str();
}

double acceptance_ratio(double f_old, double f_new, double predicted_decrease) {
  if (!(predicted_decrease < 0)) return 0.0;
  return (f_new - f_old) / predicted_decrease;
}

double update_lambda(double lambda, double rho) {
  require(lambda > 0, ErrorKind::invalid_input, "lambda must be positive");
  if (rho < 0.25) return 2.0 * lambda;
  if (rho < 0.5) return lambda;
  if (rho < 0.9) return 0.5 * lambda;
  return 0.25 * lambda;
}

BacktrackResult cubic_backtrack(const std::function<double(double)>& f_eval, double f0,
                                double slope0, double c1, int max_trials) {
  require(slope0 < 0, ErrorKind::invalid_input, "backtracking needs a descent direction");
  BacktrackResult res;
  double t = 1.0;  // full step first; required for fast local convergence
  double ft = f_eval(t);
  ++res.evaluations;
  if (ft <= f0 + c1 * t * slope0) {
    res.t = t;
    res.f_t = ft;
    return res;
  }
  double t_prev = 0.0, f_prev = 0.0;
  bool have_prev = false;
  for (int trial = 1; trial < max_trials; ++trial) {
    double t_new;
    if (!have_prev) {
      // quadratic through (0,f0,slope0) and (t,ft)
      t_new = -slope0 * t * t / (2.0 * (ft - f0 - slope0 * t));
    } else {
      // minimizer of the cubic through (0,f0,slope0), (t_prev,f_prev), (t,ft)
      const double d1 = f_prev - f0 - slope0 * t_prev;
      const double d2 = ft - f0 - slope0 * t;
      const double den = t_prev * t_prev * t * t * (t - t_prev);
      const double a = (t_prev * t_prev * d2 - t * t * d1) / den;
      const double b = (-t_prev * t_prev * t_prev * d2 + t * t * t * d1) / den;
      const double disc = b * b - 3.0 * a * slope0;
      if (a == 0.0 || disc < 0.0 || !std::isfinite(a)) {
        t_new = 0.5 * t;
      } else {
        t_new = (-b + std::sqrt(disc)) / (3.0 * a);
      }
    }
    if (!std::isfinite(t_new)) t_new = 0.5 * t;
    t_new = std::min(std::max(t_new, 0.1 * t), 0.5 * t);
    t_prev = t;
    f_prev = ft;
    have_prev = true;
    t = t_new;
    ft = f_eval(t);
    ++res.evaluations;
    if (ft <= f0 + c1 * t * slope0) {
      res.t = t;
      res.f_t = ft;
      return res;
    }
  }
  fail(ErrorKind::line_search_failure, "cubic backtracking found no admissible step");
}

bool should_anneal(double grad_l2, double tau, double gamma_tau, const TrnConfig& config) {
  return grad_l2 <= gamma_tau && tau < config.tau_max;
}

}  // namespace homrf
