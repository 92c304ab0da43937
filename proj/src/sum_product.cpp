#include "homrf/sum_product.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "homrf/errors.hpp"

namespace homrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A subset of clique member positions with its own row-major sub-indexing.
struct Scope {
  std::vector<int> pos;
  std::vector<int> dims;
  std::vector<std::uint64_t> strides;
  std::uint64_t domain = 1;
};

Scope make_scope(const CliqueShape& shape, std::span<const int> positions) {
  Scope s;
  s.pos.assign(positions.begin(), positions.end());
  s.dims.reserve(s.pos.size());
  for (int p : s.pos) s.dims.push_back(shape.dims[static_cast<std::size_t>(p)]);
  s.strides.assign(s.pos.size(), 1);
  for (int a = static_cast<int>(s.pos.size()) - 2; a >= 0; --a) {
    s.strides[static_cast<std::size_t>(a)] =
        s.strides[static_cast<std::size_t>(a + 1)] * static_cast<std::uint64_t>(s.dims[static_cast<std::size_t>(a + 1)]);
  }
  for (int d : s.dims) s.domain *= static_cast<std::uint64_t>(d);
  return s;
}

std::uint64_t scope_key(const Scope& s, std::span<const int> full_labeling) {
  std::uint64_t key = 0;
  for (std::size_t j = 0; j < s.pos.size(); ++j) {
    key += s.strides[j] * static_cast<std::uint64_t>(full_labeling[static_cast<std::size_t>(s.pos[j])]);
  }
  return key;
}

double message_log_value(const Message* m, const Scope& sc, std::span<const int> x) {
  if (m == nullptr) return 0.0;
  const double v = m->table[static_cast<Eigen::Index>(scope_key(sc, x))];
  return v > 0 ? std::log(v) : kNegInf;
}

// tau * theta for one labeling key
double factor_energy(const ScaledFactor& psi, std::uint64_t key) {
  return potential_value(*psi.source, key);
}

struct ShiftedNodeFactors {
  std::vector<Eigen::ArrayXd> u;  // exp(nf - shift), ones when absent
  std::vector<double> shift;      // max of nf, 0 when absent
  double total_shift = 0.0;
};

ShiftedNodeFactors shift_factors(const CliqueShape& shape, const NodeLogFactors& nf) {
  ShiftedNodeFactors out;
  const std::size_t k = shape.dims.size();
  out.u.resize(k);
  out.shift.assign(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    const int l = shape.dims[a];
    if (a < nf.size() && nf[a].size() > 0) {
      require(nf[a].size() == l, ErrorKind::invalid_input, "node factor length mismatch");
      out.shift[a] = nf[a].maxCoeff();
      out.u[a] = (nf[a] - out.shift[a]).exp();
    } else {
      out.u[a] = Eigen::ArrayXd::Ones(l);
    }
    out.total_shift += out.shift[a];
  }
  return out;
}

double raw_log_factor(const NodeLogFactors& nf, std::size_t a, int label) {
  if (a < nf.size() && nf[a].size() > 0) return nf[a][label];
  return 0.0;
}

}  // namespace

ScaledFactor make_scaled_factor(const Clique& clique, const CliqueShape& shape, double tau) {
  ScaledFactor f;
  f.source = &clique.potential;
  f.tau = tau;
  f.shape = shape;
  if (const auto* p = std::get_if<PatternPotential>(&clique.potential)) {
    f.pattern = true;
    f.default_energy = p->default_value;
    f.keys = std::span<const std::uint64_t>(p->keys);
    f.entry_energies = std::span<const double>(p->values);
  }
  return f;
}

void Message::normalize() {
  const double mx = table.size() > 0 ? table.maxCoeff() : 0.0;
  require(std::isfinite(mx), ErrorKind::numerical, "non-finite message");
  require(mx > 0, ErrorKind::numerical, "message underflowed to zero");
  table /= mx;
  log_offset += std::log(mx);
}

// ---------------------------------------------------------------------------
// dense message: two passes over the full clique domain with an exact
// combined-exponent shift, so no representable mass is lost.
Message dense_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                      std::span<const int> in_scope, std::span<const int> out_scope) {
  const CliqueShape& sh = psi.shape;
  const Scope in_sc = make_scope(sh, in_scope);
  const Scope out_sc = make_scope(sh, out_scope);
  require(incoming == nullptr || static_cast<std::uint64_t>(incoming->table.size()) == in_sc.domain,
          ErrorKind::invalid_input, "incoming message size mismatch");

  std::vector<int> x(sh.dims.size(), 0);
  auto exponent = [&](std::uint64_t key) {
    double e = -psi.tau * factor_energy(psi, key);
    for (std::size_t a = 0; a < sh.dims.size(); ++a) e += raw_log_factor(nf, a, x[a]);
    e += message_log_value(incoming, in_sc, x);
    return e;
  };

  double cmax = kNegInf;
  std::uint64_t key = 0;
  do {
    cmax = std::max(cmax, exponent(key));
    ++key;
  } while (next_labeling(x, sh.dims));
  require(cmax > kNegInf, ErrorKind::numerical, "all factor mass underflowed");

  Message out;
  out.dims = out_sc.dims;
  out.table = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(out_sc.domain));
  std::fill(x.begin(), x.end(), 0);
  key = 0;
  do {
    const double e = exponent(key);
    if (e > kNegInf) {
      out.table[static_cast<Eigen::Index>(scope_key(out_sc, x))] += std::exp(e - cmax);
    }
    ++key;
  } while (next_labeling(x, sh.dims));
  out.log_offset = cmax + (incoming ? incoming->log_offset : 0.0);
  out.normalize();
  return out;
}

// pattern message per the constant + exceptions split. V = (members not in
// out_scope) + (in&out overlap); the default part is one sweep over V reused
// for every separator labeling, the exceptions are an O(s) loop.
Message pattern_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                        std::span<const int> in_scope, std::span<const int> out_scope) {
  require(psi.pattern, ErrorKind::invalid_input, "pattern_message needs a pattern potential");
  const CliqueShape& sh = psi.shape;
  const std::size_t k = sh.dims.size();
  const Scope in_sc = make_scope(sh, in_scope);
  const Scope out_sc = make_scope(sh, out_scope);
  require(incoming == nullptr || static_cast<std::uint64_t>(incoming->table.size()) == in_sc.domain,
          ErrorKind::invalid_input, "incoming message size mismatch");

  std::vector<char> in_out(k, 0);  // bit0: in out_scope, bit1: in in_scope
  for (int p : out_scope) in_out[static_cast<std::size_t>(p)] |= 1;
  for (int p : in_scope) in_out[static_cast<std::size_t>(p)] |= 2;

  std::vector<int> v_pos, rest_pos;
  for (std::size_t a = 0; a < k; ++a) {
    if (!(in_out[a] & 1)) {
      rest_pos.push_back(static_cast<int>(a));
      v_pos.push_back(static_cast<int>(a));
    } else if (in_out[a] & 2) {
      v_pos.push_back(static_cast<int>(a));  // overlap: incoming depends on it
    }
  }
  const Scope v_sc = make_scope(sh, v_pos);
  // overlap positions, as a sub-scope of V keyed like out
  std::vector<int> overlap_pos;
  for (std::size_t a = 0; a < k; ++a)
    if ((in_out[a] & 1) && (in_out[a] & 2)) overlap_pos.push_back(static_cast<int>(a));
  const Scope overlap_sc = make_scope(sh, overlap_pos);

  const ShiftedNodeFactors sf = shift_factors(sh, nf);

  // default part: T(x_overlap) = sum over V\overlap of prod_{rest} u * in
  Eigen::ArrayXd t_table = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(overlap_sc.domain));
  std::vector<int> x(k, 0);  // full labeling buffer; V sweep touches v_pos only
  {
    std::vector<int> xv(v_pos.size(), 0);
    bool more = !v_pos.empty();
    do {
      for (std::size_t j = 0; j < v_pos.size(); ++j) x[static_cast<std::size_t>(v_pos[j])] = xv[j];
      double val = 1.0;
      for (int p : rest_pos) val *= sf.u[static_cast<std::size_t>(p)][x[static_cast<std::size_t>(p)]];
      if (incoming) val *= incoming->table[static_cast<Eigen::Index>(scope_key(in_sc, x))];
      t_table[static_cast<Eigen::Index>(scope_key(overlap_sc, x))] += val;
      if (v_pos.empty()) break;
      more = next_labeling(xv, v_sc.dims);
    } while (more);
    if (v_pos.empty() && incoming == nullptr) t_table[0] = 1.0;  // empty product
  }

  const double def_exp = -psi.tau * psi.default_energy;

  // exceptions: bucket (psi_e - psi_bar) * nu(e) by the separator labeling
  Eigen::ArrayXd bucket = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(out_sc.domain));
  std::vector<int> lab(k);
  for (std::size_t e = 0; e < psi.keys.size(); ++e) {
    sh.labels_of(psi.keys[e], lab);
    double nu = 1.0;
    for (int p : rest_pos) nu *= sf.u[static_cast<std::size_t>(p)][lab[static_cast<std::size_t>(p)]];
    if (incoming) nu *= incoming->table[static_cast<Eigen::Index>(scope_key(in_sc, lab))];
    if (nu == 0.0) continue;
    const double fe = std::exp(-psi.tau * psi.entry_energies[e] - def_exp);  // entry/default ratio
    bucket[static_cast<Eigen::Index>(scope_key(out_sc, lab))] += (fe - 1.0) * nu;
  }

  // assemble: m(x_out) = [T + bucket] * prod_{a in out} u_a, in default units
  Message out;
  out.dims = out_sc.dims;
  out.table = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(out_sc.domain));
  std::vector<int> xo(out_sc.pos.size(), 0);
  std::uint64_t okey = 0;
  bool more_out = true;
  do {
    for (std::size_t j = 0; j < out_sc.pos.size(); ++j)
      x[static_cast<std::size_t>(out_sc.pos[j])] = xo[j];
    double val = t_table[static_cast<Eigen::Index>(scope_key(overlap_sc, x))] +
                 bucket[static_cast<Eigen::Index>(okey)];
    for (int p : out_sc.pos) val *= sf.u[static_cast<std::size_t>(p)][x[static_cast<std::size_t>(p)]];
    out.table[static_cast<Eigen::Index>(okey)] = std::max(val, 0.0);
    ++okey;
    if (out_sc.pos.empty()) break;
    more_out = next_labeling(xo, out_sc.dims);
  } while (more_out);

  out.log_offset = def_exp + sf.total_shift + (incoming ? incoming->log_offset : 0.0);
  out.normalize();
  return out;
}

Message emit_message(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* incoming,
                     std::span<const int> in_scope, std::span<const int> out_scope) {
  if (psi.pattern && !out_scope.empty()) return pattern_message(psi, nf, incoming, in_scope, out_scope);
  return dense_message(psi, nf, incoming, in_scope, out_scope);
}

// ---------------------------------------------------------------------------
namespace {

// Dense-path statistics: exact combined-exponent shift, any potential kind.
CliqueStats dense_stats(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* in,
                        const Scope& in_sc, const Message* out, const Scope& out_sc,
                        const CliqueStatsRequest& req) {
  const CliqueShape& sh = psi.shape;
  const std::size_t k = sh.dims.size();

  std::vector<int> x(k, 0);
  auto exponent = [&](std::uint64_t key) {
    double e = -psi.tau * factor_energy(psi, key);
    for (std::size_t a = 0; a < k; ++a) e += raw_log_factor(nf, a, x[a]);
    e += message_log_value(in, in_sc, x);
    e += message_log_value(out, out_sc, x);
    return e;
  };

  double cmax = kNegInf;
  std::uint64_t key = 0;
  do {
    cmax = std::max(cmax, exponent(key));
    ++key;
  } while (next_labeling(x, sh.dims));
  require(cmax > kNegInf, ErrorKind::numerical, "clique belief underflowed to zero");

  CliqueStats st;
  st.tau_ = psi.tau;
  if (req.node_marginals) {
    st.node_marginals.resize(k);
    for (std::size_t a = 0; a < k; ++a)
      st.node_marginals[a] = Eigen::VectorXd::Zero(sh.dims[a]);
  }
  if (req.pair_marginals) {
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        PairTable pt;
        pt.a = static_cast<int>(a);
        pt.b = static_cast<int>(b);
        pt.table = Eigen::MatrixXd::Zero(sh.dims[a], sh.dims[b]);
        st.pair_marginals.push_back(std::move(pt));
      }
  }
  if (req.full_belief) {
    require(sh.domain <= req.belief_cap, ErrorKind::capacity, "clique belief table exceeds cap");
    st.belief = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sh.domain));
  }

  double z = 0.0;
  std::fill(x.begin(), x.end(), 0);
  key = 0;
  do {
    const double e = exponent(key);
    if (e > kNegInf) {
      const double w = std::exp(e - cmax);
      z += w;
      if (req.node_marginals)
        for (std::size_t a = 0; a < k; ++a) st.node_marginals[a][x[a]] += w;
      if (req.pair_marginals) {
        std::size_t idx = 0;
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = a + 1; b < k; ++b) st.pair_marginals[idx++].table(x[a], x[b]) += w;
      }
      if (req.full_belief) st.belief[static_cast<Eigen::Index>(key)] = w;
    }
    ++key;
  } while (next_labeling(x, sh.dims));
  require(z > 0 && std::isfinite(z), ErrorKind::numerical, "clique partition underflowed");

  st.log_partition = std::log(z) + cmax + (in ? in->log_offset : 0.0) + (out ? out->log_offset : 0.0);
  if (req.node_marginals)
    for (auto& m : st.node_marginals) m /= m.sum();
  if (req.pair_marginals)
    for (auto& p : st.pair_marginals) p.table /= p.table.sum();
  if (req.full_belief) st.belief /= st.belief.sum();
  return st;
}

// Pattern-path node marginals/partition. Default part sweeps the union of
// the message scopes (everything else is separable); exceptions are O(s).
CliqueStats pattern_stats(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* in,
                          const Scope& in_sc, const Message* out, const Scope& out_sc,
                          const CliqueStatsRequest& req) {
  const CliqueShape& sh = psi.shape;
  const std::size_t k = sh.dims.size();
  const ShiftedNodeFactors sf = shift_factors(sh, nf);

  std::vector<char> in_u(k, 0);
  for (int p : in_sc.pos) in_u[static_cast<std::size_t>(p)] = 1;
  for (int p : out_sc.pos) in_u[static_cast<std::size_t>(p)] = 1;
  std::vector<int> u_pos, r_pos;
  for (std::size_t a = 0; a < k; ++a) (in_u[a] ? u_pos : r_pos).push_back(static_cast<int>(a));
  const Scope u_sc = make_scope(sh, u_pos);

  // separable sums over the rest
  std::vector<double> s_sum(k, 1.0);
  double s_prod = 1.0;
  for (int p : r_pos) {
    s_sum[static_cast<std::size_t>(p)] = sf.u[static_cast<std::size_t>(p)].sum();
    s_prod *= s_sum[static_cast<std::size_t>(p)];
  }

  // base(x_U) = prod_{a in U} u_a * in * out, swept twice (max then sums)
  const double def_exp = -psi.tau * psi.default_energy;
  std::vector<int> x(k, 0);
  auto base_at = [&]() {
    double v = 1.0;
    for (int p : u_pos) v *= sf.u[static_cast<std::size_t>(p)][x[static_cast<std::size_t>(p)]];
    if (in) v *= in->table[static_cast<Eigen::Index>(scope_key(in_sc, x))];
    if (out) v *= out->table[static_cast<Eigen::Index>(scope_key(out_sc, x))];
    return v;
  };

  // candidate exponents for the global scale
  double base_max = 0.0;
  {
    std::vector<int> xu(u_pos.size(), 0);
    bool more = true;
    do {
      for (std::size_t j = 0; j < u_pos.size(); ++j) x[static_cast<std::size_t>(u_pos[j])] = xu[j];
      base_max = std::max(base_max, base_at());
      if (u_pos.empty()) break;
      more = next_labeling(xu, u_sc.dims);
    } while (more);
  }
  double cmax = base_max > 0 ? def_exp + sf.total_shift + std::log(base_max) : kNegInf;
  std::vector<int> lab(k);
  std::vector<double> entry_exact(psi.keys.size(), kNegInf);
  for (std::size_t e = 0; e < psi.keys.size(); ++e) {
    sh.labels_of(psi.keys[e], lab);
    double ee = -psi.tau * psi.entry_energies[e];
    for (std::size_t a = 0; a < k; ++a) ee += raw_log_factor(nf, a, lab[a]);
    for (std::size_t j = 0; j < k; ++j) x[j] = lab[j];
    if (in) {
      const double v = in->table[static_cast<Eigen::Index>(scope_key(in_sc, x))];
      ee += v > 0 ? std::log(v) : kNegInf;
    }
    if (out) {
      const double v = out->table[static_cast<Eigen::Index>(scope_key(out_sc, x))];
      ee += v > 0 ? std::log(v) : kNegInf;
    }
    entry_exact[e] = ee;
    cmax = std::max(cmax, ee);
  }
  require(cmax > kNegInf, ErrorKind::numerical, "clique belief underflowed to zero");

  // scaled default unit: fd = exp(def_exp + total_shift - cmax)
  const double fd = std::exp(def_exp + sf.total_shift - cmax);

  CliqueStats st;
  st.tau_ = psi.tau;
  st.node_marginals.resize(k);
  for (std::size_t a = 0; a < k; ++a) st.node_marginals[a] = Eigen::VectorXd::Zero(sh.dims[a]);

  // default part
  double base_total = 0.0;
  {
    std::vector<int> xu(u_pos.size(), 0);
    bool more = true;
    do {
      for (std::size_t j = 0; j < u_pos.size(); ++j) x[static_cast<std::size_t>(u_pos[j])] = xu[j];
      const double b = base_at();
      base_total += b;
      for (int p : u_pos)
        st.node_marginals[static_cast<std::size_t>(p)][x[static_cast<std::size_t>(p)]] += b;
      if (u_pos.empty()) break;
      more = next_labeling(xu, u_sc.dims);
    } while (more);
  }
  double z = fd * base_total * s_prod;
  for (int p : u_pos) st.node_marginals[static_cast<std::size_t>(p)] *= fd * s_prod;
  for (int p : r_pos) {
    const double rest_excl = s_sum[static_cast<std::size_t>(p)] > 0
                                 ? s_prod / s_sum[static_cast<std::size_t>(p)]
                                 : 0.0;
    st.node_marginals[static_cast<std::size_t>(p)] =
        (fd * base_total * rest_excl) * sf.u[static_cast<std::size_t>(p)].matrix();
  }

  // exceptions
  for (std::size_t e = 0; e < psi.keys.size(); ++e) {
    sh.labels_of(psi.keys[e], lab);
    for (std::size_t j = 0; j < k; ++j) x[j] = lab[j];
    double nu = 1.0;
    for (std::size_t a = 0; a < k; ++a) nu *= sf.u[a][lab[a]];
    if (in) nu *= in->table[static_cast<Eigen::Index>(scope_key(in_sc, x))];
    if (out) nu *= out->table[static_cast<Eigen::Index>(scope_key(out_sc, x))];
    const double t_exact = entry_exact[e] > kNegInf ? std::exp(entry_exact[e] - cmax) : 0.0;
    const double w = t_exact - fd * nu;
    z += w;
    for (std::size_t a = 0; a < k; ++a) st.node_marginals[a][lab[a]] += w;
  }
  require(z > 0 && std::isfinite(z), ErrorKind::numerical, "clique partition underflowed");

  st.log_partition = std::log(z) + cmax + (in ? in->log_offset : 0.0) + (out ? out->log_offset : 0.0);
  for (auto& m : st.node_marginals) {
    m = m.cwiseMax(0.0);
    m /= m.sum();
  }
  if (!req.node_marginals) st.node_marginals.clear();
  return st;
}

}  // namespace

CliqueStats clique_stats(const ScaledFactor& psi, const NodeLogFactors& nf, const Message* in,
                         std::span<const int> in_scope, const Message* out,
                         std::span<const int> out_scope, const CliqueStatsRequest& req) {
  const Scope in_sc = make_scope(psi.shape, in_scope);
  const Scope out_sc = make_scope(psi.shape, out_scope);
  require(in == nullptr || static_cast<std::uint64_t>(in->table.size()) == in_sc.domain,
          ErrorKind::invalid_input, "in message size mismatch");
  require(out == nullptr || static_cast<std::uint64_t>(out->table.size()) == out_sc.domain,
          ErrorKind::invalid_input, "out message size mismatch");
  if (psi.pattern && !req.pair_marginals && !req.full_belief) {
    return pattern_stats(psi, nf, in, in_sc, out, out_sc, req);
  }
  return dense_stats(psi, nf, in, in_sc, out, out_sc, req);
}

CliqueStats singleton_stats(const ScaledFactor& psi, const NodeLogFactors& nf,
                            const CliqueStatsRequest& req) {
  return clique_stats(psi, nf, nullptr, {}, nullptr, {}, req);
}

// ---------------------------------------------------------------------------

std::vector<NodeLogFactors> fold_chain_factors(const MrfModel& model, const DualLayout& layout,
                                               const Subgraph& chain, const Eigen::VectorXd& delta,
                                               double tau) {
  const std::size_t T = chain.cliques.size();
  std::vector<NodeLogFactors> nf(T);
  std::set<int> assigned;
  for (std::size_t t = 0; t < T; ++t) {
    const int cid = chain.cliques[t];
    const Clique& cl = model.cliques[static_cast<std::size_t>(cid)];
    nf[t].resize(cl.nodes.size());
    for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
      const int node = cl.nodes[a];
      if (!assigned.insert(node).second) continue;  // folded at first occurrence
      const int l = model.labels[static_cast<std::size_t>(node)];
      Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(l);
      for (const auto& mem : layout.memberships(node)) {
        // only this chain's cliques contribute
        if (std::find(chain.cliques.begin(), chain.cliques.end(), mem.clique) == chain.cliques.end())
          continue;
        sum += delta.segment(mem.offset, l).array();
      }
      nf[t][a] = tau * sum;
    }
  }
  return nf;
}

namespace {

std::vector<int> positions_of(const Clique& cl, const std::vector<int>& nodes) {
  std::vector<int> pos;
  pos.reserve(nodes.size());
  for (int v : nodes) {
    auto it = std::find(cl.nodes.begin(), cl.nodes.end(), v);
    require(it != cl.nodes.end(), ErrorKind::invalid_decomposition, "separator node not in clique");
    pos.push_back(static_cast<int>(it - cl.nodes.begin()));
  }
  return pos;
}

}  // namespace

ChainCalibration::ChainCalibration(const MrfModel& model, const DualLayout& layout,
                                   const Subgraph& chain, const Eigen::VectorXd& delta, double tau,
                                   bool want_marginals)
    : model_(&model), tau_(tau), clique_ids_(chain.cliques) {
  const std::size_t T = chain.cliques.size();
  shapes_.reserve(T);
  factors_.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    shapes_.push_back(model.shape(chain.cliques[t]));
    factors_.push_back(
        make_scaled_factor(model.cliques[static_cast<std::size_t>(chain.cliques[t])], shapes_[t], tau));
  }
  node_factors_ = fold_chain_factors(model, layout, chain, delta, tau);

  in_scopes_.resize(T);
  out_scopes_.resize(T);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const auto& sep = chain.separators[t];  // sorted node ids
    out_scopes_[t] = positions_of(model.cliques[static_cast<std::size_t>(chain.cliques[t])], sep);
    in_scopes_[t + 1] = positions_of(model.cliques[static_cast<std::size_t>(chain.cliques[t + 1])], sep);
  }

  if (T > 1) {
    forward_.resize(T - 1);
    backward_.resize(T - 1);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      forward_[t] = emit_message(factors_[t], node_factors_[t], t > 0 ? &forward_[t - 1] : nullptr,
                                 in_scopes_[t], out_scopes_[t]);
    }
    for (std::size_t t = T - 1; t >= 1; --t) {
      backward_[t - 1] =
          emit_message(factors_[t], node_factors_[t], t + 1 < T ? &backward_[t] : nullptr,
                       out_scopes_[t], in_scopes_[t]);
    }
  }

  // partition from both ends; the two use disjoint message sweeps
  CliqueStatsRequest zreq;
  zreq.node_marginals = want_marginals;
  node_marginals_.resize(T);
  double log_z_first = 0.0, log_z_last = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const Message* in = (t > 0 && T > 1) ? &forward_[t - 1] : nullptr;
    const Message* out = (t + 1 < T) ? &backward_[t] : nullptr;
    if (!want_marginals && t != 0 && t + 1 != T) continue;
    CliqueStats st = clique_stats(factors_[t], node_factors_[t], in, in_scopes_[t], out,
                                  out_scopes_[t], zreq);
    if (t == 0) log_z_first = st.log_partition;
    if (t + 1 == T) log_z_last = st.log_partition;
    if (want_marginals) node_marginals_[t] = std::move(st.node_marginals);
  }
  if (T == 1) log_z_last = log_z_first;
  log_partition_ = log_z_first;
  partition_consistency_ = std::abs(std::expm1(log_z_first - log_z_last));
}

Eigen::MatrixXd ChainCalibration::pair_marginal(int t, int member_a, int member_b) const {
  require(t >= 0 && t < length(), ErrorKind::invalid_input, "chain clique index out of range");
  const std::size_t tt = static_cast<std::size_t>(t);
  const int k = static_cast<int>(shapes_[tt].dims.size());
  require(member_a >= 0 && member_a < k && member_b >= 0 && member_b < k && member_a != member_b,
          ErrorKind::invalid_input, "pair members must be distinct clique members");
  const bool swap = member_a > member_b;
  const int a = swap ? member_b : member_a;
  const int b = swap ? member_a : member_b;
  CliqueStatsRequest req;
  req.node_marginals = false;
  req.pair_marginals = true;
  const Message* in = (t > 0 && length() > 1) ? &forward_[tt - 1] : nullptr;
  const Message* out = (t + 1 < length()) ? &backward_[tt] : nullptr;
  CliqueStats st = clique_stats(factors_[tt], node_factors_[tt], in, in_scopes_[tt], out,
                                out_scopes_[tt], req);
  for (const auto& pt : st.pair_marginals) {
    if (pt.a == a && pt.b == b) {
      if (swap) return pt.table.transpose();
      return pt.table;
    }
  }
  fail(ErrorKind::invalid_input, "pair not found");
}

Eigen::VectorXd ChainCalibration::clique_belief(int t, std::uint64_t cap) const {
  require(t >= 0 && t < length(), ErrorKind::invalid_input, "chain clique index out of range");
  const std::size_t tt = static_cast<std::size_t>(t);
  CliqueStatsRequest req;
  req.node_marginals = false;
  req.full_belief = true;
  req.belief_cap = cap;
  const Message* in = (t > 0 && length() > 1) ? &forward_[tt - 1] : nullptr;
  const Message* out = (t + 1 < length()) ? &backward_[tt] : nullptr;
  CliqueStats st = clique_stats(factors_[tt], node_factors_[tt], in, in_scopes_[tt], out,
                                out_scopes_[tt], req);
  return st.belief;
}

double chain_min_energy(const MrfModel& model, const DualLayout& layout, const Subgraph& chain,
                        const Eigen::VectorXd& delta) {
  const std::size_t T = chain.cliques.size();
  // unscaled delta sums, same folding as the factors
  std::vector<NodeLogFactors> nf = fold_chain_factors(model, layout, chain, delta, 1.0);

  Eigen::ArrayXd carry;  // min table over the previous separator
  Scope prev_out;
  for (std::size_t t = 0; t < T; ++t) {
    const int cid = chain.cliques[t];
    const Clique& cl = model.cliques[static_cast<std::size_t>(cid)];
    const CliqueShape sh = model.shape(cid);
    std::vector<int> in_pos, out_pos;
    if (t > 0) in_pos = positions_of(cl, chain.separators[t - 1]);
    if (t + 1 < T) out_pos = positions_of(cl, chain.separators[t]);
    const Scope in_sc = make_scope(sh, in_pos);
    const Scope out_sc = make_scope(sh, out_pos);
    Eigen::ArrayXd next = Eigen::ArrayXd::Constant(static_cast<Eigen::Index>(out_sc.domain),
                                                   std::numeric_limits<double>::infinity());
    std::vector<int> x(sh.dims.size(), 0);
    std::uint64_t key = 0;
    do {
      double v = potential_value(cl.potential, key);
      for (std::size_t a = 0; a < sh.dims.size(); ++a) v -= raw_log_factor(nf[t], a, x[a]);
      if (t > 0) v += carry[static_cast<Eigen::Index>(scope_key(in_sc, x))];
      auto& slot = next[static_cast<Eigen::Index>(scope_key(out_sc, x))];
      slot = std::min(slot, v);
      ++key;
    } while (next_labeling(x, sh.dims));
    carry = std::move(next);
    prev_out = out_sc;
  }
  return carry[0];
}

}  // namespace homrf
