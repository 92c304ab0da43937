#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "homrf/model.hpp"
#include "homrf/smooth_dual.hpp"

namespace homrf {

// Clique potential viewed as an exp(-tau*theta) factor. Pattern structure
// survives reparameterization because the delta terms are separable node
// factors, so the factor stays "constant + s exceptions".
struct ScaledFactor {
  const Potential* source = nullptr;
  double tau = 1.0;
  bool pattern = false;
  CliqueShape shape;
  // pattern data (views into the potential)
  double default_energy = 0.0;
  std::span<const std::uint64_t> keys;
  std::span<const double> entry_energies;
};

ScaledFactor make_scaled_factor(const Clique& clique, const CliqueShape& shape, double tau);

// Per-member separable log factors (tau * folded delta sums); a zero-size
// array means no factor on that member.
using NodeLogFactors = std::vector<Eigen::ArrayXd>;

// Separator table, scaled so the stored maximum is ~1; log_offset restores
// the true magnitude. dims follow the separator's node-id order.
struct Message {
  std::vector<int> dims;
  Eigen::ArrayXd table;
  double log_offset = 0.0;

  void normalize();  // fold the max into log_offset; all-zero -> underflow error
};

// Sum-product message out of one clique over out_scope (member positions):
//   m(x_out) = sum_{x_rest} psi(x) * prod_a exp(nf[a](x_a)) * in(x_in)
// in_scope gives the incoming table's member positions, in dim order.
Message dense_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                      std::span<const int> in_scope, std::span<const int> out_scope);
// Same values at O(l^|V| + l^|out| + s) via the constant + exceptions split,
// V = rest + (in&out overlap).
Message pattern_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                        std::span<const int> in_scope, std::span<const int> out_scope);
Message emit_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                     std::span<const int> in_scope, std::span<const int> out_scope);

// --- clique belief statistics -------------------------------------------

struct CliqueStatsRequest {
  bool node_marginals = true;
  bool pair_marginals = false;
  bool full_belief = false;
  std::uint64_t belief_cap = 1ULL << 22;
};

struct CliqueStats {
  double log_partition = 0.0;  // log sum over the clique belief, offsets included
  double smin() const { return -log_partition / tau_; }
  double tau_ = 1.0;
  std::vector<Eigen::VectorXd> node_marginals;
  std::vector<PairTable> pair_marginals;
  Eigen::VectorXd belief;
};

// Statistics of w(x) ~ psi(x) * prod_a exp(nf[a](x_a)) * in(x_in) * out(x_out).
// Messages are optional (both null for singleton cliques). Pair marginals and
// full beliefs take the dense path; node marginals use the pattern split when
// psi is pattern-based.
CliqueStats clique_stats(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* in,
                         std::span<const int> in_scope, const Message* out,
                         std::span<const int> out_scope, const CliqueStatsRequest& req);

// Convenience for singleton-clique subproblems.
CliqueStats singleton_stats(const ScaledFactor& psi, const NodeLogFactors& nf,
                            const CliqueStatsRequest& req);

// --- clique chains ---------------------------------------------------------

class ChainCalibration {
 public:
  ChainCalibration(const MrfModel& model, const DualLayout& layout, const Subgraph& chain,
                   const Eigen::VectorXd& delta, double tau, bool want_marginals = true);

  double log_partition() const { return log_partition_; }
  double smin() const { return -log_partition_ / tau_; }
  // |Z_fwd/Z_bwd - 1|, the two independent sweep estimates
  double partition_consistency() const { return partition_consistency_; }

  const Eigen::VectorXd& node_marginal(int t, int member) const {
    return node_marginals_[static_cast<std::size_t>(t)][static_cast<std::size_t>(member)];
  }
  Eigen::MatrixXd pair_marginal(int t, int member_a, int member_b) const;
  Eigen::VectorXd clique_belief(int t, std::uint64_t cap) const;

  int length() const { return static_cast<int>(clique_ids_.size()); }
  int clique_id(int t) const { return clique_ids_[static_cast<std::size_t>(t)]; }

 private:
  const MrfModel* model_;
  double tau_;
  std::vector<int> clique_ids_;
  std::vector<CliqueShape> shapes_;
  std::vector<ScaledFactor> factors_;
  std::vector<NodeLogFactors> node_factors_;
  std::vector<std::vector<int>> in_scopes_;
  std::vector<std::vector<int>> out_scopes_;
  std::vector<Message> forward_;
  std::vector<Message> backward_;
  std::vector<std::vector<Eigen::VectorXd>> node_marginals_;
  double log_partition_ = 0.0;
  double partition_consistency_ = 0.0;
};

// Per-(chain clique, member) tau*delta sums with each node's total folded
// into the first chain clique containing it.
std::vector<NodeLogFactors> fold_chain_factors(const MrfModel& model, const DualLayout& layout,
                                               const Subgraph& chain, const Eigen::VectorXd& delta,
                                               double tau);

// Exact (min,+) counterpart of the chain partition, for the non-smooth dual.
double chain_min_energy(const MrfModel& model, const DualLayout& layout, const Subgraph& chain,
                        const Eigen::VectorXd& delta);

}  // namespace homrf
