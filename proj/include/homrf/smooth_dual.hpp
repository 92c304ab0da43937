#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "homrf/model.hpp"

namespace homrf {

// Flat layout of the dual variables delta_ci(x_i): per clique, per member
// node, a contiguous block of l_i entries. N = sum_c sum_{i in c} l_i.
class DualLayout {
 public:
  struct Membership {
    int clique;
    int member;  // position of the node inside the clique
    int offset;  // block start in the flat vector
  };

  explicit DualLayout(const MrfModel& model);

  int size() const { return size_; }
  int offset(int clique, int member) const {
    return offsets_[static_cast<std::size_t>(clique)][static_cast<std::size_t>(member)];
  }
  std::span<const Membership> memberships(int node) const {
    return memberships_[static_cast<std::size_t>(node)];
  }
  const MrfModel& model() const { return *model_; }

 private:
  const MrfModel* model_;
  int size_ = 0;
  std::vector<std::vector<int>> offsets_;                 // [clique][member]
  std::vector<std::vector<Membership>> memberships_;      // [node]
};

struct PairTable {
  int a = 0, b = 0;     // member positions, a < b
  Eigen::MatrixXd table;  // l_a x l_b joint marginal
};

// Marginals of the softmin distributions at a dual point. clique_node is
// laid out like the dual vector itself.
struct MarginalCache {
  Eigen::VectorXd clique_node;                    // mu_ci(x_i), flat
  std::vector<Eigen::VectorXd> node;              // mu_i per node
  std::vector<std::vector<PairTable>> pairs;      // per clique (optional)
  std::vector<Eigen::VectorXd> clique_belief;     // full w_c tables (optional)

  bool has_pairs = false;
  bool has_beliefs = false;
};

struct SmoothObjective {
  const MrfModel* model;
  const Decomposition* decomposition;
  const DualLayout* layout;
  double tau;

  SmoothObjective(const MrfModel& m, const Decomposition& d, const DualLayout& l, double tau_);
};

// -(1/tau) log sum exp(-tau v), max-shift stabilized.
double smin(std::span<const double> values, double tau);

// Value of the smooth dual (Eq. with smin terms), the maximization objective.
double eval_smooth_dual(const SmoothObjective& obj, const Eigen::VectorXd& delta);

// Exact-min counterpart, used for reporting and exit certification.
double eval_nonsmooth_dual(const MrfModel& model, const Decomposition& decomposition,
                           const DualLayout& layout, const Eigen::VectorXd& delta);

struct MarginalRequest {
  bool pairs = false;           // clique pair marginals (singleton subgraphs only)
  bool clique_beliefs = false;  // full clique distributions (dense; capacity-capped)
};

struct GradientResult {
  double f = 0.0;           // f = -smooth dual (minimization convention)
  Eigen::VectorXd grad;     // df/d delta_ci(x_i) = mu_ci - mu_i
  MarginalCache marginals;
};

GradientResult gradient(const SmoothObjective& obj, const Eigen::VectorXd& delta,
                        const MarginalRequest& req = {});

}  // namespace homrf
