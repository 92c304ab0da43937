#pragma once

#include <Eigen/Core>
#include <vector>

#include "homrf/smooth_dual.hpp"

namespace homrf {

// Structured Hessian of f = -g_tau for singleton-clique decompositions.
// Component one: one symmetric block per clique over its (member, label)
// axis, tau*(mu_cij - mu_ci mu_cj). Component two: one block per node,
// tau*(diag(mu_i) - mu_i mu_i^T), replicated across every clique pair
// containing the node.
struct HessianBlocks {
  const DualLayout* layout = nullptr;
  double tau = 0.0;
  std::vector<Eigen::MatrixXd> clique_blocks;  // per clique, D_c x D_c
  std::vector<int> clique_offsets;             // flat offset of each clique block
  std::vector<Eigen::MatrixXd> node_blocks;    // per node, l_i x l_i
};

HessianBlocks build_hessian_blocks(const DualLayout& layout, const MarginalCache& marginals,
                                   double tau);

// (H + lambda I) v
Eigen::VectorXd hvp(const HessianBlocks& blocks, const Eigen::VectorXd& v, double lambda);

// Explicit N x N matrix; test oracle, N <= 2000.
Eigen::MatrixXd dense_hessian(const HessianBlocks& blocks);

// Clique-block-diagonal preconditioner: per clique, the full second
// derivative restricted to the clique's own dual block, plus lambda I.
// Inverses are eigendecomposed with an eigenvalue floor, which doubles as
// the pseudo-inverse fallback for singular blocks at lambda ~ 0.
struct Preconditioner {
  std::vector<Eigen::MatrixXd> inverse_blocks;
  std::vector<int> offsets;
  bool used_pseudo_inverse = false;
};

Preconditioner build_preconditioner(const HessianBlocks& blocks, double lambda);
Eigen::VectorXd apply_preconditioner(const Preconditioner& pre, const Eigen::VectorXd& r);

}  // namespace homrf
