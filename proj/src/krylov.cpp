#include "homrf/krylov.hpp"

#include <cmath>

#include "homrf/errors.hpp"

namespace homrf {

CgReport pcg_solve(const LinearOperator& op, const LinearOperator& precond,
                   const Eigen::VectorXd& rhs, double eta, int max_iter) {
  require(eta >= 0, ErrorKind::invalid_input, "eta must be non-negative");
  CgReport rep;
  rep.direction = Eigen::VectorXd::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    rep.reason = CgStop::tolerance;
    return rep;
  }
  const double target = eta * rhs_norm;

  Eigen::VectorXd p = rep.direction;
  Eigen::VectorXd r = rhs;  // r = rhs - A p, p = 0
  Eigen::VectorXd z = precond(r);
  Eigen::VectorXd d = z;
  double rz = r.dot(z);
  double quad = 0.0;  // p^T A p, maintained incrementally

  int it = 0;
  CgStop reason = CgStop::max_iter;
  while (it < max_iter) {
    const Eigen::VectorXd q = op(d);
    require(q.allFinite(), ErrorKind::numerical, "operator produced non-finite values");
    const double dq = d.dot(q);
    if (dq <= 1e-14 * d.squaredNorm()) {
      reason = CgStop::negative_curvature;
      break;
    }
    const double alpha = rz / dq;
    p += alpha * d;
    // p^T A p after p += alpha d: quad + 2 alpha d^T A p_old + alpha^2 d^T A d;
    // d^T A p_old = d^T (rhs - r_old) and r_old = rhs - A p_old
    quad += 2.0 * alpha * d.dot(rhs - r) + alpha * alpha * dq;
    r -= alpha * q;
    ++it;
    if (it % 50 == 0) r = rhs - op(p);  // drift refresh
    if (r.norm() <= target) {
      reason = CgStop::tolerance;
      break;
    }
    z = precond(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
  }

  rep.direction = p;
  rep.iterations = it;
  rep.reason = reason;
  const Eigen::VectorXd ap = op(p);
  rep.residual_norm = (ap - rhs).norm();
  rep.quadratic_term = p.dot(ap);
  return rep;
}

double forcing_sequence(int k, double eps_tau, double grad_norm) {
  require(k >= 1, ErrorKind::invalid_input, "outer iteration index starts at 1");
  require(eps_tau > 0, ErrorKind::invalid_input, "eps_tau must be positive");
  return std::min(eps_tau / static_cast<double>(k), std::sqrt(grad_norm));
}

}  // namespace homrf
