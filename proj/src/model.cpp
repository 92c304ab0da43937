#include "homrf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "homrf/errors.hpp"

namespace homrf {

namespace {
constexpr std::uint64_t kDomainCap = 1ULL << 62;
}

double PatternPotential::value_at(std::uint64_t key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it != keys.end() && *it == key) return values[static_cast<std::size_t>(it - keys.begin())];
  return default_value;
}

std::uint64_t CliqueShape::key_of(std::span<const int> labels) const {
  std::uint64_t key = 0;
  for (std::size_t a = 0; a < dims.size(); ++a) key += strides[a] * static_cast<std::uint64_t>(labels[a]);
  return key;
}

void CliqueShape::labels_of(std::uint64_t key, std::span<int> out) const {
  for (std::size_t a = 0; a < dims.size(); ++a) {
    out[a] = static_cast<int>((key / strides[a]) % static_cast<std::uint64_t>(dims[a]));
  }
}

CliqueShape make_shape(std::span<const int> dims) {
  CliqueShape s;
  s.dims.assign(dims.begin(), dims.end());
  s.strides.assign(dims.size(), 1);
  for (int a = static_cast<int>(dims.size()) - 2; a >= 0; --a) {
    s.strides[a] = s.strides[a + 1] * static_cast<std::uint64_t>(dims[a + 1]);
  }
  s.domain = 1;
  for (int d : dims) {
    require(d > 0, ErrorKind::invalid_input, "label count must be positive");
    require(s.domain <= kDomainCap / static_cast<std::uint64_t>(d), ErrorKind::capacity,
            "clique labeling domain exceeds 2^62");
    s.domain *= static_cast<std::uint64_t>(d);
  }
  return s;
}

CliqueShape MrfModel::shape(int clique) const {
  const Clique& c = cliques[static_cast<std::size_t>(clique)];
  std::vector<int> dims(c.nodes.size());
  for (std::size_t a = 0; a < c.nodes.size(); ++a) dims[a] = labels[static_cast<std::size_t>(c.nodes[a])];
  return make_shape(dims);
}

std::uint64_t MrfModel::clique_domain(int clique) const { return shape(clique).domain; }

void MrfModel::validate() const {
  require(node_count >= 0, ErrorKind::invalid_input, "negative node count");
  require(static_cast<int>(labels.size()) == node_count, ErrorKind::invalid_input,
          "labels size != node_count");
  require(static_cast<int>(unaries.size()) == node_count, ErrorKind::invalid_input,
          "unaries size != node_count");
  for (int i = 0; i < node_count; ++i) {
    require(labels[static_cast<std::size_t>(i)] > 0, ErrorKind::invalid_input,
            "node " + std::to_string(i) + ": label count must be positive");
    require(unaries[static_cast<std::size_t>(i)].size() ==
                static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]),
            ErrorKind::invalid_input, "node " + std::to_string(i) + ": unary table size mismatch");
  }
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    const Clique& cl = cliques[c];
    require(cl.order() >= 2, ErrorKind::invalid_input,
            "clique " + std::to_string(c) + ": order must be >= 2");
    std::set<int> seen;
    for (int v : cl.nodes) {
      require(v >= 0 && v < node_count, ErrorKind::invalid_input,
              "clique " + std::to_string(c) + ": node id out of range");
      require(seen.insert(v).second, ErrorKind::invalid_input,
              "clique " + std::to_string(c) + ": repeated node");
    }
    const CliqueShape sh = shape(static_cast<int>(c));
    if (const auto* d = std::get_if<DensePotential>(&cl.potential)) {
      require(d->values.size() == sh.domain, ErrorKind::invalid_input,
              "clique " + std::to_string(c) + ": dense table size mismatch");
    } else {
      const auto& p = std::get<PatternPotential>(cl.potential);
      require(p.keys.size() == p.values.size(), ErrorKind::invalid_input,
              "clique " + std::to_string(c) + ": pattern keys/values mismatch");
      require(p.keys.size() <= sh.domain, ErrorKind::invalid_input,
              "clique " + std::to_string(c) + ": more pattern entries than labelings");
      for (std::size_t e = 0; e < p.keys.size(); ++e) {
        require(p.keys[e] < sh.domain, ErrorKind::invalid_input,
                "clique " + std::to_string(c) + ": pattern key out of domain");
        if (e > 0)
          require(p.keys[e - 1] < p.keys[e], ErrorKind::invalid_input,
                  "clique " + std::to_string(c) + ": pattern keys not sorted/unique");
      }
    }
  }
}

double potential_value(const Potential& p, std::uint64_t key) {
  if (const auto* d = std::get_if<DensePotential>(&p)) return d->values[static_cast<std::size_t>(key)];
  return std::get<PatternPotential>(p).value_at(key);
}

bool next_labeling(std::span<int> x, std::span<const int> dims) {
  for (int a = static_cast<int>(x.size()) - 1; a >= 0; --a) {
    if (++x[static_cast<std::size_t>(a)] < dims[static_cast<std::size_t>(a)]) return true;
    x[static_cast<std::size_t>(a)] = 0;
  }
  return false;
}

double energy(const MrfModel& model, const Labeling& x) {
  require(x.size() == static_cast<std::size_t>(model.node_count), ErrorKind::invalid_input,
          "labeling length != node_count");
  for (int i = 0; i < model.node_count; ++i) {
    require(x[static_cast<std::size_t>(i)] >= 0 &&
                x[static_cast<std::size_t>(i)] < model.labels[static_cast<std::size_t>(i)],
            ErrorKind::invalid_input, "label out of range at node " + std::to_string(i));
  }
  double e = 0.0;
  for (int i = 0; i < model.node_count; ++i) {
    e += model.unaries[static_cast<std::size_t>(i)][static_cast<std::size_t>(x[static_cast<std::size_t>(i)])];
  }
  std::vector<int> local;
  for (std::size_t c = 0; c < model.cliques.size(); ++c) {
    const Clique& cl = model.cliques[c];
    const CliqueShape sh = model.shape(static_cast<int>(c));
    local.resize(cl.nodes.size());
    for (std::size_t a = 0; a < cl.nodes.size(); ++a)
      local[a] = x[static_cast<std::size_t>(cl.nodes[a])];
    e += potential_value(cl.potential, sh.key_of(local));
  }
  return e;
}

MapResult brute_force_map(const MrfModel& model, std::uint64_t cap) {
  double total = 1.0;
  for (int l : model.labels) total *= static_cast<double>(l);
  require(total <= static_cast<double>(cap), ErrorKind::capacity,
          "joint labeling domain exceeds brute-force cap");

  MapResult best;
  best.labeling.assign(static_cast<std::size_t>(model.node_count), 0);
  best.energy = std::numeric_limits<double>::infinity();
  Labeling x(static_cast<std::size_t>(model.node_count), 0);
  do {
    const double e = energy(model, x);
    if (e < best.energy) {
      best.energy = e;
      best.labeling = x;
    }
  } while (next_labeling(x, model.labels));
  return best;
}

bool Decomposition::all_singleton() const {
  return std::all_of(subgraphs.begin(), subgraphs.end(),
                     [](const Subgraph& s) { return s.singleton(); });
}

void Decomposition::validate(const MrfModel& model) const {
  std::vector<char> used(model.cliques.size(), 0);
  for (const Subgraph& sg : subgraphs) {
    require(!sg.cliques.empty(), ErrorKind::invalid_decomposition, "empty subgraph");
    require(sg.separators.size() + 1 == sg.cliques.size(), ErrorKind::invalid_decomposition,
            "separator count must be clique count - 1");
    for (int c : sg.cliques) {
      require(c >= 0 && c < static_cast<int>(model.cliques.size()), ErrorKind::invalid_decomposition,
              "clique id out of range");
      require(!used[static_cast<std::size_t>(c)], ErrorKind::invalid_decomposition,
              "clique " + std::to_string(c) + " appears in more than one subgraph");
      used[static_cast<std::size_t>(c)] = 1;
    }
    for (std::size_t t = 0; t + 1 < sg.cliques.size(); ++t) {
      const auto& a = model.cliques[static_cast<std::size_t>(sg.cliques[t])].nodes;
      const auto& b = model.cliques[static_cast<std::size_t>(sg.cliques[t + 1])].nodes;
      std::set<int> sa(a.begin(), a.end());
      std::vector<int> inter;
      for (int v : b)
        if (sa.count(v)) inter.push_back(v);
      std::sort(inter.begin(), inter.end());
      require(!inter.empty(), ErrorKind::invalid_decomposition,
              "consecutive chain cliques share no node");
      std::vector<int> sep = sg.separators[t];
      std::sort(sep.begin(), sep.end());
      require(sep == inter, ErrorKind::invalid_decomposition,
              "separator is not the clique intersection");
    }
    // running intersection: each node occupies a contiguous clique range
    if (sg.cliques.size() > 1) {
      std::set<int> nodes;
      for (int c : sg.cliques)
        for (int v : model.cliques[static_cast<std::size_t>(c)].nodes) nodes.insert(v);
      for (int v : nodes) {
        int first = -1, last = -1;
        for (std::size_t t = 0; t < sg.cliques.size(); ++t) {
          const auto& nn = model.cliques[static_cast<std::size_t>(sg.cliques[t])].nodes;
          if (std::find(nn.begin(), nn.end(), v) != nn.end()) {
            if (first < 0) first = static_cast<int>(t);
            last = static_cast<int>(t);
          }
        }
        for (int t = first; t <= last; ++t) {
          const auto& nn = model.cliques[static_cast<std::size_t>(sg.cliques[static_cast<std::size_t>(t)])].nodes;
          require(std::find(nn.begin(), nn.end(), v) != nn.end(), ErrorKind::invalid_decomposition,
                  "chain violates the running-intersection property at node " + std::to_string(v));
        }
      }
    }
  }
  for (std::size_t c = 0; c < used.size(); ++c) {
    require(used[c], ErrorKind::invalid_decomposition,
            "clique " + std::to_string(c) + " missing from decomposition");
  }
}

Decomposition build_clique_decomposition(const MrfModel& model) {
  Decomposition d;
  d.subgraphs.resize(model.cliques.size());
  for (std::size_t c = 0; c < model.cliques.size(); ++c) d.subgraphs[c].cliques = {static_cast<int>(c)};
  return d;
}

Decomposition build_chain_decomposition(const MrfModel& model,
                                        const std::vector<std::vector<int>>& chains) {
  Decomposition d;
  for (const auto& ids : chains) {
    Subgraph sg;
    sg.cliques = ids;
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
      require(ids[t] >= 0 && ids[t] < static_cast<int>(model.cliques.size()) && ids[t + 1] >= 0 &&
                  ids[t + 1] < static_cast<int>(model.cliques.size()),
              ErrorKind::invalid_decomposition, "clique id out of range");
      const auto& a = model.cliques[static_cast<std::size_t>(ids[t])].nodes;
      const auto& b = model.cliques[static_cast<std::size_t>(ids[t + 1])].nodes;
      std::set<int> sa(a.begin(), a.end());
      std::vector<int> inter;
      for (int v : b)
        if (sa.count(v)) inter.push_back(v);
      std::sort(inter.begin(), inter.end());
      sg.separators.push_back(inter);
    }
    d.subgraphs.push_back(std::move(sg));
  }
  d.validate(model);
  return d;
}

}  // namespace homrf
