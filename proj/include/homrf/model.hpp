#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace homrf {

using Labeling = std::vector<int>;

// Clique table over the full labeling domain, row-major with the last
// member node fastest.
struct DensePotential {
  std::vector<double> values;
};

// Sparse table: default_value everywhere except the listed labelings.
// Keys are row-major flat indices, kept sorted and unique.
struct PatternPotential {
  double default_value = 0.0;
  std::vector<std::uint64_t> keys;
  std::vector<double> values;

  std::size_t size() const { return keys.size(); }
  // default_value for non-entries
  double value_at(std::uint64_t key) const;
};

using Potential = std::variant<DensePotential, PatternPotential>;

struct Clique {
  std::vector<int> nodes;
  Potential potential;

  int order() const { return static_cast<int>(nodes.size()); }
};

// Shape of a clique's labeling domain: per-member label counts and
// row-major strides (last member fastest).
struct CliqueShape {
  std::vector<int> dims;
  std::vector<std::uint64_t> strides;
  std::uint64_t domain = 1;

  std::uint64_t key_of(std::span<const int> labels) const;
  void labels_of(std::uint64_t key, std::span<int> out) const;
};

CliqueShape make_shape(std::span<const int> dims);

struct MrfModel {
  int node_count = 0;
  std::vector<int> labels;                   // l_i per node
  std::vector<std::vector<double>> unaries;  // theta_i tables
  std::vector<Clique> cliques;

  CliqueShape shape(int clique) const;
  std::uint64_t clique_domain(int clique) const;
  // throws invalid_input on any structural violation
  void validate() const;
};

double potential_value(const Potential& p, std::uint64_t key);

// Walks labelings in row-major order (last coordinate fastest); returns
// false after the last one wraps to zero.
bool next_labeling(std::span<int> x, std::span<const int> dims);

double energy(const MrfModel& model, const Labeling& x);

struct MapResult {
  Labeling labeling;
  double energy = 0.0;
};

// Exhaustive minimization; first minimizer in row-major order wins ties.
MapResult brute_force_map(const MrfModel& model, std::uint64_t cap = 10000000ULL);

// --- decompositions ---------------------------------------------------

struct Subgraph {
  std::vector<int> cliques;                 // clique ids, chain order
  std::vector<std::vector<int>> separators; // node sets between consecutive cliques

  bool singleton() const { return cliques.size() == 1; }
};

struct Decomposition {
  std::vector<Subgraph> subgraphs;

  bool all_singleton() const;
  void validate(const MrfModel& model) const;
};

Decomposition build_clique_decomposition(const MrfModel& model);
Decomposition build_chain_decomposition(const MrfModel& model,
                                        const std::vector<std::vector<int>>& chains);

// --- instance generators ----------------------------------------------

struct PointMatchingOptions {
  int n = 16;               // perfect square; n nodes, n labels
  double sigma = 0.1;       // target jitter
  int k_neighbors = 10;     // pattern entries per triangle clique
  std::uint64_t seed = 0;
  double unary_weight = 1.0;  // |i - x_i| scale; 0 gives zero unaries
};

MrfModel gen_point_matching(const PointMatchingOptions& opt);

struct GridCurvatureOptions {
  int width = 4;
  int height = 4;
  int labels = 4;
  double trunc = 2.0;        // second-difference truncation, the pattern default
  double unary_scale = 1.0;  // random unary magnitude
  std::uint64_t seed = 0;
};

MrfModel gen_grid_curvature(const GridCurvatureOptions& opt);

// Horizontal/vertical clique chains matching gen_grid_curvature's clique
// order, for chain decompositions of grid instances.
std::vector<std::vector<int>> grid_chain_ids(int width, int height);

// --- text format (see README: HOMRF 1) ---------------------------------

MrfModel load_model(const std::string& path);
void save_model(const MrfModel& model, const std::string& path);

std::string format_double(double v);          // shortest round-trip decimal
double parse_double(const std::string& tok);  // strict; throws parse error

}  // namespace homrf
