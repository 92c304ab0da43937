#pragma once

#include <Eigen/Core>
#include <deque>

#include "homrf/solver.hpp"

namespace homrf {

// Limited-memory BFGS Hessian approximation in compact form,
//   B = gamma I - W M^{-1} W^T,  W = [gamma S  Y],
// with the curvature guard s'y > 1e-8 ||s|| ||y||.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int dim, int memory = 10);

  // append (s, y) if the curvature condition holds; returns acceptance
  bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y);
  // (B + lambda I) v
  Eigen::VectorXd apply(const Eigen::VectorXd& v, double lambda) const;
  void clear();

  int stored() const { return static_cast<int>(s_.size()); }
  int skipped() const { return skipped_; }
  double gamma() const { return gamma_; }
  int rank() const { return 2 * stored(); }

 private:
  int dim_;
  int memory_;
  int skipped_ = 0;
  double gamma_ = 1.0;
  std::deque<Eigen::VectorXd> s_;
  std::deque<Eigen::VectorXd> y_;
  Eigen::MatrixXd w_;       // dim x 2r
  Eigen::MatrixXd m_inv_;   // 2r x 2r
  void rebuild();
};

Eigen::VectorXd qn_hvp(const LbfgsMemory& memory, const Eigen::VectorXd& v, double lambda);

// Algorithm 1 with B_qn in place of the exact Hessian and an identity
// preconditioner; gradients come from chain sum-product, so any
// decomposition with gradient support works.
SolveReport qn_solve(const MrfModel& model, const Decomposition& decomposition,
                     const TrnConfig& config, const IterationObserver& observer = {});

}  // namespace homrf
