#pragma once

#include <Eigen/Core>
#include <functional>

namespace homrf {

enum class CgStop { tolerance, max_iter, negative_curvature };

struct CgReport {
  Eigen::VectorXd direction;
  double residual_norm = 0.0;  // recomputed ||A p - rhs||, not the recurrence
  int iterations = 0;
  CgStop reason = CgStop::tolerance;
  double quadratic_term = 0.0;  // p^T A p, reused by the acceptance ratio
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Preconditioned CG from p = 0 on A p = rhs with A = B + lambda I (PSD + shift).
// Truncation: ||r_j||_2 <= eta * ||rhs||_2 (the unpreconditioned residual).
// Directions of non-positive curvature return the current iterate. The
// recurrence residual is refreshed by a true recomputation every 50 steps.
CgReport pcg_solve(const LinearOperator& op, const LinearOperator& precond,
                   const Eigen::VectorXd& rhs, double eta, int max_iter = 250);

// eta_k = min(eps_tau / k, sqrt(grad_norm))
double forcing_sequence(int k, double eps_tau, double grad_norm);

}  // namespace homrf
