#include "newton_driver.hpp"

#include <algorithm>
#include <limits>

namespace homrf::detail {

namespace {
constexpr double kEps = 2.220446049250313e-16;

double wall_ms_since(const std::chrono::steady_clock::time_point& t0, bool enabled) {
  if (!enabled) return 0.0;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace

double pd_gap_probe(const MrfModel& model, const Decomposition& decomposition,
                    const DualLayout& layout, const Eigen::VectorXd& delta, double tau,
                    bool& capacity_ok) {
  try {
    SmoothObjective obj(model, decomposition, layout, tau);
    MarginalRequest req;
    req.clique_beliefs = true;
    GradientResult gr = gradient(obj, delta, req);
    const PrimalPoint primal = recover_feasible_primal(model, layout, gr.marginals);
    return pd_gap(model, decomposition, layout, delta, primal, tau).nonsmooth;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::capacity) {
      capacity_ok = false;
      return std::numeric_limits<double>::infinity();
    }
    throw;
  }
}

void finalize_report(SolveReport& report, const MrfModel& model,
                     const Decomposition& decomposition, const DualLayout& layout,
                     const Eigen::VectorXd& delta, const MarginalCache& marginals, double tau,
                     double f, long long& oracle_calls) {
  report.delta = delta;
  report.final_tau = tau;
  report.smooth_dual = -f;
  report.nonsmooth_dual = eval_nonsmooth_dual(model, decomposition, layout, delta);
  report.labeling = round_primal(marginals);
  report.integer_primal = energy(model, report.labeling);
  report.primal_recovered = false;
  report.nonsmooth_primal = std::numeric_limits<double>::quiet_NaN();
  try {
    SmoothObjective obj(model, decomposition, layout, tau);
    MarginalRequest req;
    req.clique_beliefs = true;
    GradientResult gr = gradient(obj, delta, req);
    ++oracle_calls;
    const PrimalPoint primal = recover_feasible_primal(model, layout, gr.marginals);
    const PdGap gaps = pd_gap(model, decomposition, layout, delta, primal, tau);
    report.nonsmooth_primal = gaps.primal_objective;
    report.feasibility_residual = primal.feasibility_residual;
    report.primal_recovered = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::capacity) throw;
  }
  report.oracle_calls = oracle_calls;
}

SolveReport run_newton_loop(const MrfModel& model, const Decomposition& decomposition,
                            const TrnConfig& config, const IterationObserver& observer,
                            NewtonStrategy& strategy, const char* solver_name) {
  config.validate();
  decomposition.validate(model);
  set_num_threads(config.threads);
  const auto t0 = std::chrono::steady_clock::now();

  DualLayout layout(model);
  SolveReport report;
  report.solver = solver_name;

  TrnState state;
  state.delta = Eigen::VectorXd::Zero(layout.size());
  state.tau = config.tau0;
  state.lambda = config.lambda0;
  state.eps_tau = eps_tau_for(state.tau, config.tau_max);

  long long oracle = 0;
  const MarginalRequest mreq = strategy.marginal_request();

  SmoothObjective obj(model, decomposition, layout, state.tau);
  GradientResult gr = gradient(obj, state.delta, mreq);
  ++oracle;
  strategy.at_new_point(gr, state.tau);
  state.gamma_tau = config.beta * gr.grad.norm();

  bool pd_gap_capacity_ok = true;
  int steps_since_gap = 0;
  int consecutive_ls_failures = 0;
  bool exited = false;
  TraceEvent exit_event = TraceEvent::exit_grad;

  auto emit_row = [&](TraceEvent event, int cg_iters, double rho, double lambda_before,
                      double lambda_after, double eta) {
    TraceRow row;
    row.oracle_calls = oracle;
    row.wall_ms = wall_ms_since(t0, config.wall_clock);
    row.tau = state.tau;
    row.lambda = lambda_before;
    row.f = gr.f;
    row.grad_l2 = gr.grad.norm();
    row.grad_linf = gr.grad.size() > 0 ? gr.grad.cwiseAbs().maxCoeff() : 0.0;
    row.cg_iters = cg_iters;
    row.event = event;
    state.trace.push_back(row);
    if (observer) {
      IterationInfo info;
      info.row = row;
      info.rho = rho;
      info.lambda_before = lambda_before;
      info.eta = eta;
      info.delta = &state.delta;
      info.grad = &gr.grad;
      info.marginals = &gr.marginals;
      info.blocks = strategy.blocks();
      info.tau = state.tau;
      info.lambda_after = lambda_after;
      observer(info);
    }
  };

  auto do_anneal = [&]() {
    state.tau *= config.alpha;
    if (state.tau > config.tau_max) state.tau = config.tau_max;
    obj = SmoothObjective(model, decomposition, layout, state.tau);
    gr = gradient(obj, state.delta, mreq);
    ++oracle;
    strategy.at_new_point(gr, state.tau);
    strategy.on_anneal();
    state.gamma_tau = config.beta * gr.grad.norm();
    state.eps_tau = eps_tau_for(state.tau, config.tau_max);
    emit_row(TraceEvent::anneal, 0, 0.0, state.lambda, state.lambda, 0.0);
  };

  while (state.k < config.max_outer) {
    ++state.k;
    const double gl2 = gr.grad.norm();
    const double glinf = gr.grad.size() > 0 ? gr.grad.cwiseAbs().maxCoeff() : 0.0;

    if (glinf <= config.zeta && state.tau >= config.tau_max) {
      exited = true;
      exit_event = TraceEvent::exit_grad;
      break;
    }
    if (config.pd_gap_every > 0 && pd_gap_capacity_ok && ++steps_since_gap >= config.pd_gap_every) {
      steps_since_gap = 0;
      ++oracle;
      const double gap = pd_gap_probe(model, decomposition, layout, state.delta, state.tau,
                                      pd_gap_capacity_ok);
      if (gap <= config.pd_gap_tol) {
        exited = true;
        exit_event = TraceEvent::exit_pdgap;
        break;
      }
    }
    if (should_anneal(gl2, state.tau, state.gamma_tau, config)) {
      do_anneal();
      continue;
    }
    // numerically stationary at this tau: push the schedule or stop
    if (gl2 <= 1e-14 * std::max(1.0, std::abs(gr.f))) {
      if (state.tau < config.tau_max) {
        do_anneal();
        continue;
      }
      exited = true;
      exit_event = TraceEvent::exit_grad;
      break;
    }

    const double eta = forcing_sequence(state.k, state.eps_tau, gl2);
    const CgReport cg = strategy.direction(gr.grad, state.lambda, eta, config.cg_max);
    const Eigen::VectorXd& p = cg.direction;
    const double qd = gr.grad.dot(p) + 0.5 * cg.quadratic_term;
    if (qd >= -16.0 * kEps * std::max(1.0, std::abs(gr.f))) {
      // predicted decrease below double resolution
      if (state.tau < config.tau_max) {
        do_anneal();
        continue;
      }
      exited = true;
      exit_event = TraceEvent::exit_grad;
      break;
    }

    GradientResult trial = gradient(obj, state.delta + p, mreq);
    ++oracle;
    const double rho = acceptance_ratio(gr.f, trial.f, qd);
    state.last_rho = rho;
    const double lambda_before = state.lambda;
    state.lambda = update_lambda(state.lambda, rho);

    if (rho >= config.eps_rho) {
      const Eigen::VectorXd grad_old = gr.grad;
      state.delta += p;
      gr = std::move(trial);
      strategy.at_new_point(gr, state.tau);
      strategy.on_accept(p, grad_old, gr.grad);
      consecutive_ls_failures = 0;
      emit_row(TraceEvent::step, cg.iterations, rho, lambda_before, state.lambda, eta);
      continue;
    }

    // insufficient agreement: backtrack along p
    const double slope = gr.grad.dot(p);
    require(std::isfinite(slope), ErrorKind::numerical, "non-finite slope");
    BacktrackResult bt;
    try {
      bt = cubic_backtrack(
          [&](double t) {
            ++oracle;
            return eval_smooth_dual(obj, state.delta + t * p) * -1.0;
          },
          gr.f, slope);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::line_search_failure) throw;
      ++consecutive_ls_failures;
      require(consecutive_ls_failures <= 5, ErrorKind::numerical,
              "line search failed 5 times under lambda escalation");
      state.lambda *= 10.0;
      continue;
    }
    const Eigen::VectorXd grad_old = gr.grad;
    const Eigen::VectorXd step = bt.t * p;
    state.delta += step;
    gr = gradient(obj, state.delta, mreq);
    ++oracle;
    strategy.at_new_point(gr, state.tau);
    strategy.on_accept(step, grad_old, gr.grad);
    consecutive_ls_failures = 0;
    emit_row(TraceEvent::backtrack, cg.iterations, rho, lambda_before, state.lambda, eta);
  }

  report.exit_reason = exited ? trace_event_name(exit_event) : "max-iter";
  report.iterations = state.k;
  if (exited) {
    ++oracle;  // the exit row's non-smooth evaluation
  }
  finalize_report(report, model, decomposition, layout, state.delta, gr.marginals, state.tau, gr.f,
                  oracle);
  if (exited) {
    // re-emit with the exit event so traces end on the certified row
    TraceRow row;
    row.oracle_calls = oracle;
    row.wall_ms = wall_ms_since(t0, config.wall_clock);
    row.tau = state.tau;
    row.lambda = state.lambda;
    row.f = gr.f;
    row.grad_l2 = gr.grad.norm();
    row.grad_linf = gr.grad.size() > 0 ? gr.grad.cwiseAbs().maxCoeff() : 0.0;
    row.cg_iters = 0;
    row.event = exit_event;
    state.trace.push_back(row);
    if (observer) {
      IterationInfo info;
      info.row = row;
      info.lambda_before = state.lambda;
      info.delta = &state.delta;
      info.grad = &gr.grad;
      info.marginals = &gr.marginals;
      info.blocks = strategy.blocks();
      info.tau = state.tau;
      observer(info);
    }
  }
  report.trace = std::move(state.trace);
  report.oracle_calls = oracle;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace homrf::detail
