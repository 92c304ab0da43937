#include "homrf/hessian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "homrf/errors.hpp"
#include "homrf/parallel.hpp"

namespace homrf {

HessianBlocks build_hessian_blocks(const DualLayout& layout, const MarginalCache& marginals,
                                   double tau) {
  require(marginals.has_pairs, ErrorKind::unsupported,
          "exact Hessian needs pair marginals (singleton-clique decomposition)");
  const MrfModel& model = layout.model();
  HessianBlocks blocks;
  blocks.layout = &layout;
  blocks.tau = tau;
  const std::size_t n_cliques = model.cliques.size();
  blocks.clique_blocks.resize(n_cliques);
  blocks.clique_offsets.resize(n_cliques);
  blocks.node_blocks.resize(static_cast<std::size_t>(model.node_count));

  parallel_for(n_cliques, [&](std::size_t c) {
    const Clique& cl = model.cliques[c];
    const int base = layout.offset(static_cast<int>(c), 0);
    blocks.clique_offsets[c] = base;
    int d = 0;
    for (int node : cl.nodes) d += model.labels[static_cast<std::size_t>(node)];
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
      const int la = model.labels[static_cast<std::size_t>(cl.nodes[a])];
      const int oa = layout.offset(static_cast<int>(c), static_cast<int>(a)) - base;
      const auto mu_a = marginals.clique_node.segment(layout.offset(static_cast<int>(c), static_cast<int>(a)), la);
      h.block(oa, oa, la, la) = tau * (Eigen::MatrixXd(mu_a.asDiagonal()) - mu_a * mu_a.transpose());
    }
    for (const PairTable& pt : marginals.pairs[c]) {
      const int la = model.labels[static_cast<std::size_t>(cl.nodes[static_cast<std::size_t>(pt.a)])];
      const int lb = model.labels[static_cast<std::size_t>(cl.nodes[static_cast<std::size_t>(pt.b)])];
      const int oa = layout.offset(static_cast<int>(c), pt.a) - base;
      const int ob = layout.offset(static_cast<int>(c), pt.b) - base;
      const auto mu_a = marginals.clique_node.segment(layout.offset(static_cast<int>(c), pt.a), la);
      const auto mu_b = marginals.clique_node.segment(layout.offset(static_cast<int>(c), pt.b), lb);
      const Eigen::MatrixXd off = tau * (pt.table - mu_a * mu_b.transpose());
      h.block(oa, ob, la, lb) = off;
      h.block(ob, oa, lb, la) = off.transpose();
    }
    blocks.clique_blocks[c] = std::move(h);
  });

  parallel_for(static_cast<std::size_t>(model.node_count), [&](std::size_t i) {
    const Eigen::VectorXd& mu = marginals.node[i];
    blocks.node_blocks[i] = tau * (Eigen::MatrixXd(mu.asDiagonal()) - mu * mu.transpose());
  });
  return blocks;
}

Eigen::VectorXd hvp(const HessianBlocks& blocks, const Eigen::VectorXd& v, double lambda) {
  const DualLayout& layout = *blocks.layout;
  const MrfModel& model = layout.model();
  require(v.size() == layout.size(), ErrorKind::invalid_input, "hvp dimension mismatch");

  Eigen::VectorXd out = lambda * v;
  // component one: disjoint clique slices
  std::vector<Eigen::VectorXd> clique_out(blocks.clique_blocks.size());
  parallel_for(blocks.clique_blocks.size(), [&](std::size_t c) {
    const Eigen::MatrixXd& h = blocks.clique_blocks[c];
    clique_out[c] = h * v.segment(blocks.clique_offsets[c], h.rows());
  });
  for (std::size_t c = 0; c < clique_out.size(); ++c) {
    out.segment(blocks.clique_offsets[c], clique_out[c].size()) += clique_out[c];
  }
  // component two: per node, the block applied to the summed slices, copied
  // back to every containing clique (the repeated block rows/columns)
  std::vector<Eigen::VectorXd> node_out(static_cast<std::size_t>(model.node_count));
  parallel_for(static_cast<std::size_t>(model.node_count), [&](std::size_t i) {
    const int l = model.labels[i];
    Eigen::VectorXd s = Eigen::VectorXd::Zero(l);
    for (const auto& mem : layout.memberships(static_cast<int>(i))) s += v.segment(mem.offset, l);
    node_out[i] = blocks.node_blocks[i] * s;
  });
  for (int i = 0; i < model.node_count; ++i) {
    const int l = model.labels[static_cast<std::size_t>(i)];
    for (const auto& mem : layout.memberships(i)) {
      out.segment(mem.offset, l) += node_out[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

Eigen::MatrixXd dense_hessian(const HessianBlocks& blocks) {
  const DualLayout& layout = *blocks.layout;
  const MrfModel& model = layout.model();
  const int n = layout.size();
  require(n <= 2000, ErrorKind::capacity, "dense Hessian limited to N <= 2000");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t c = 0; c < blocks.clique_blocks.size(); ++c) {
    const int base = blocks.clique_offsets[c];
    const int d = static_cast<int>(blocks.clique_blocks[c].rows());
    h.block(base, base, d, d) += blocks.clique_blocks[c];
  }
  for (int i = 0; i < model.node_count; ++i) {
    const int l = model.labels[static_cast<std::size_t>(i)];
    for (const auto& m1 : layout.memberships(i)) {
      for (const auto& m2 : layout.memberships(i)) {
        h.block(m1.offset, m2.offset, l, l) += blocks.node_blocks[static_cast<std::size_t>(i)];
      }
    }
  }
  return h;
}

Preconditioner build_preconditioner(const HessianBlocks& blocks, double lambda) {
  require(lambda >= 0, ErrorKind::invalid_input, "lambda must be non-negative");
  const DualLayout& layout = *blocks.layout;
  const MrfModel& model = layout.model();
  Preconditioner pre;
  pre.inverse_blocks.resize(blocks.clique_blocks.size());
  pre.offsets = blocks.clique_offsets;
  std::vector<char> pseudo(blocks.clique_blocks.size(), 0);

  parallel_for(blocks.clique_blocks.size(), [&](std::size_t c) {
    const Clique& cl = model.cliques[c];
    const int base = blocks.clique_offsets[c];
    Eigen::MatrixXd m = blocks.clique_blocks[c];
    for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
      const int node = cl.nodes[a];
      const int l = model.labels[static_cast<std::size_t>(node)];
      const int o = layout.offset(static_cast<int>(c), static_cast<int>(a)) - base;
      m.block(o, o, l, l) += blocks.node_blocks[static_cast<std::size_t>(node)];
    }
    m.diagonal().array() += lambda;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const double scale = m.diagonal().sum() / static_cast<double>(m.rows());
    const double floor = std::max(1e-10 * std::max(scale, 1e-30), 1e-300);
    Eigen::VectorXd inv_ev = eig.eigenvalues();
    for (int j = 0; j < inv_ev.size(); ++j) {
      if (inv_ev[j] < floor) {
        inv_ev[j] = floor;
        pseudo[c] = 1;
      }
      inv_ev[j] = 1.0 / inv_ev[j];
    }
    pre.inverse_blocks[c] =
        eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose();
  });
  for (char p : pseudo) pre.used_pseudo_inverse |= (p != 0);
  return pre;
}

Eigen::VectorXd apply_preconditioner(const Preconditioner& pre, const Eigen::VectorXd& r) {
  Eigen::VectorXd out(r.size());
  for (std::size_t c = 0; c < pre.inverse_blocks.size(); ++c) {
    const int d = static_cast<int>(pre.inverse_blocks[c].rows());
    out.segment(pre.offsets[c], d) = pre.inverse_blocks[c] * r.segment(pre.offsets[c], d);
  }
  return out;
}

}  // namespace homrf
