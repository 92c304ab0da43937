#include "homrf/smooth_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "homrf/errors.hpp"
#include "homrf/parallel.hpp"
#include "homrf/sum_product.hpp"

namespace homrf {

DualLayout::DualLayout(const MrfModel& model) : model_(&model) {
  model.validate();
  offsets_.resize(model.cliques.size());
  memberships_.resize(static_cast<std::size_t>(model.node_count));
  for (std::size_t c = 0; c < model.cliques.size(); ++c) {
    const Clique& cl = model.cliques[c];
    offsets_[c].resize(cl.nodes.size());
    for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
      offsets_[c][a] = size_;
      memberships_[static_cast<std::size_t>(cl.nodes[a])].push_back(
          {static_cast<int>(c), static_cast<int>(a), size_});
      size_ += model.labels[static_cast<std::size_t>(cl.nodes[a])];
    }
  }
}

SmoothObjective::SmoothObjective(const MrfModel& m, const Decomposition& d, const DualLayout& l,
                                 double tau_)
    : model(&m), decomposition(&d), layout(&l), tau(tau_) {
  require(tau_ > 0, ErrorKind::invalid_input, "tau must be positive");
}

double smin(std::span<const double> values, double tau) {
  require(!values.empty(), ErrorKind::invalid_input, "smin of empty list");
  require(tau > 0, ErrorKind::invalid_input, "smin needs tau > 0");
  const double m = *std::min_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(-tau * (v - m));
  return m - std::log(s) / tau;
}

namespace {

// node term b_i(x_i) = theta_i + sum_{c contains i} delta_ci(x_i)
Eigen::ArrayXd node_reparam(const MrfModel& model, const DualLayout& layout, int node,
                            const Eigen::VectorXd& delta) {
  const int l = model.labels[static_cast<std::size_t>(node)];
  Eigen::ArrayXd b = Eigen::Map<const Eigen::ArrayXd>(
      model.unaries[static_cast<std::size_t>(node)].data(), l);
  for (const auto& mem : layout.memberships(node)) b += delta.segment(mem.offset, l).array();
  return b;
}

// per-(clique, member) tau*delta factors for a singleton subgraph
NodeLogFactors singleton_factors(const MrfModel& model, const DualLayout& layout, int clique,
                                 const Eigen::VectorXd& delta, double tau) {
  const Clique& cl = model.cliques[static_cast<std::size_t>(clique)];
  NodeLogFactors nf(cl.nodes.size());
  for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
    const int l = model.labels[static_cast<std::size_t>(cl.nodes[a])];
    nf[a] = tau * delta.segment(layout.offset(clique, static_cast<int>(a)), l).array();
  }
  return nf;
}

void check_dimensions(const SmoothObjective& obj, const Eigen::VectorXd& delta) {
  require(delta.size() == obj.layout->size(), ErrorKind::invalid_input,
          "dual vector dimension mismatch");
  require(std::isfinite(obj.tau), ErrorKind::invalid_input, "tau must be finite");
}

}  // namespace

double eval_smooth_dual(const SmoothObjective& obj, const Eigen::VectorXd& delta) {
  check_dimensions(obj, delta);
  const MrfModel& model = *obj.model;
  const DualLayout& layout = *obj.layout;
  const auto& subgraphs = obj.decomposition->subgraphs;

  std::vector<double> sub_vals(subgraphs.size(), 0.0);
  parallel_for(subgraphs.size(), [&](std::size_t s) {
    const Subgraph& sg = subgraphs[s];
    if (sg.singleton()) {
      const int cid = sg.cliques[0];
      const CliqueShape sh = model.shape(cid);
      const ScaledFactor psi = make_scaled_factor(model.cliques[static_cast<std::size_t>(cid)], sh, obj.tau);
      CliqueStatsRequest req;
      req.node_marginals = false;
      sub_vals[s] = singleton_stats(psi, singleton_factors(model, layout, cid, delta, obj.tau), req).smin();
    } else {
      sub_vals[s] = ChainCalibration(model, layout, sg, delta, obj.tau, /*want_marginals=*/false).smin();
    }
  });

  std::vector<double> node_vals(static_cast<std::size_t>(model.node_count), 0.0);
  parallel_for(static_cast<std::size_t>(model.node_count), [&](std::size_t i) {
    const Eigen::ArrayXd b = node_reparam(model, layout, static_cast<int>(i), delta);
    node_vals[i] = smin(std::span<const double>(b.data(), static_cast<std::size_t>(b.size())), obj.tau);
  });

  double g = std::accumulate(sub_vals.begin(), sub_vals.end(), 0.0);
  g = std::accumulate(node_vals.begin(), node_vals.end(), g);
  require(std::isfinite(g), ErrorKind::numerical, "smooth dual is not finite");
  return g;
}

double eval_nonsmooth_dual(const MrfModel& model, const Decomposition& decomposition,
                           const DualLayout& layout, const Eigen::VectorXd& delta) {
  require(delta.size() == layout.size(), ErrorKind::invalid_input, "dual vector dimension mismatch");
  std::vector<double> sub_vals(decomposition.subgraphs.size(), 0.0);
  parallel_for(decomposition.subgraphs.size(), [&](std::size_t s) {
    sub_vals[s] = chain_min_energy(model, layout, decomposition.subgraphs[s], delta);
  });
  double g = std::accumulate(sub_vals.begin(), sub_vals.end(), 0.0);
  for (int i = 0; i < model.node_count; ++i) {
    g += node_reparam(model, layout, i, delta).minCoeff();
  }
  return g;
}

GradientResult gradient(const SmoothObjective& obj, const Eigen::VectorXd& delta,
                        const MarginalRequest& req) {
  check_dimensions(obj, delta);
  const MrfModel& model = *obj.model;
  const DualLayout& layout = *obj.layout;
  const auto& subgraphs = obj.decomposition->subgraphs;
  const int n_cliques = static_cast<int>(model.cliques.size());

  GradientResult res;
  res.marginals.clique_node = Eigen::VectorXd::Zero(layout.size());
  res.marginals.node.resize(static_cast<std::size_t>(model.node_count));
  if (req.pairs) {
    require(obj.decomposition->all_singleton(), ErrorKind::unsupported,
            "pair marginals need a singleton-clique decomposition");
    res.marginals.pairs.resize(static_cast<std::size_t>(n_cliques));
    res.marginals.has_pairs = true;
  }
  if (req.clique_beliefs) {
    res.marginals.clique_belief.resize(static_cast<std::size_t>(n_cliques));
    res.marginals.has_beliefs = true;
  }

  std::vector<double> sub_vals(subgraphs.size(), 0.0);
  parallel_for(subgraphs.size(), [&](std::size_t s) {
    const Subgraph& sg = subgraphs[s];
    if (sg.singleton()) {
      const int cid = sg.cliques[0];
      const CliqueShape sh = model.shape(cid);
      const ScaledFactor psi =
          make_scaled_factor(model.cliques[static_cast<std::size_t>(cid)], sh, obj.tau);
      CliqueStatsRequest creq;
      creq.node_marginals = true;
      creq.pair_marginals = req.pairs;
      creq.full_belief = req.clique_beliefs;
      CliqueStats st =
          singleton_stats(psi, singleton_factors(model, layout, cid, delta, obj.tau), creq);
      sub_vals[s] = st.smin();
      const Clique& cl = model.cliques[static_cast<std::size_t>(cid)];
      for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
        res.marginals.clique_node.segment(layout.offset(cid, static_cast<int>(a)),
                                          st.node_marginals[a].size()) = st.node_marginals[a];
      }
      if (req.pairs) res.marginals.pairs[static_cast<std::size_t>(cid)] = std::move(st.pair_marginals);
      if (req.clique_beliefs)
        res.marginals.clique_belief[static_cast<std::size_t>(cid)] = std::move(st.belief);
    } else {
      ChainCalibration calib(model, layout, sg, delta, obj.tau);
      sub_vals[s] = calib.smin();
      for (int t = 0; t < calib.length(); ++t) {
        const int cid = calib.clique_id(t);
        const Clique& cl = model.cliques[static_cast<std::size_t>(cid)];
        for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
          res.marginals.clique_node.segment(layout.offset(cid, static_cast<int>(a)),
                                            model.labels[static_cast<std::size_t>(cl.nodes[a])]) =
              calib.node_marginal(t, static_cast<int>(a));
        }
        if (req.clique_beliefs) {
          res.marginals.clique_belief[static_cast<std::size_t>(cid)] =
              calib.clique_belief(t, CliqueStatsRequest{}.belief_cap);
        }
      }
    }
  });

  std::vector<double> node_vals(static_cast<std::size_t>(model.node_count), 0.0);
  parallel_for(static_cast<std::size_t>(model.node_count), [&](std::size_t i) {
    const Eigen::ArrayXd b = node_reparam(model, layout, static_cast<int>(i), delta);
    require(b.allFinite(), ErrorKind::numerical, "non-finite node potential");
    const double m = b.minCoeff();
    Eigen::ArrayXd w = (-obj.tau * (b - m)).exp();
    const double z = w.sum();
    node_vals[i] = m - std::log(z) / obj.tau;
    res.marginals.node[i] = (w / z).matrix();
  });

  double g = std::accumulate(sub_vals.begin(), sub_vals.end(), 0.0);
  g = std::accumulate(node_vals.begin(), node_vals.end(), g);
  require(std::isfinite(g), ErrorKind::numerical, "smooth dual is not finite");

  res.f = -g;
  res.grad = res.marginals.clique_node;
  for (int i = 0; i < model.node_count; ++i) {
    const int l = model.labels[static_cast<std::size_t>(i)];
    for (const auto& mem : layout.memberships(i)) {
      res.grad.segment(mem.offset, l) -= res.marginals.node[static_cast<std::size_t>(i)];
    }
  }
  return res;
}

}  // namespace homrf
