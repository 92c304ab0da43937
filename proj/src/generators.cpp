#include <algorithm>
#include <cmath>
#include <set>

#include "homrf/errors.hpp"
#include "homrf/model.hpp"
#include "homrf/rng.hpp"

namespace homrf {

namespace {

struct Point {
  double x, y;
};

double side_len(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

MrfModel gen_point_matching(const PointMatchingOptions& opt) {
  const int n = opt.n;
  const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  require(n >= 4 && root * root == n, ErrorKind::invalid_input,
          "point-matching n must be a perfect square >= 4");
  require(opt.k_neighbors >= 1, ErrorKind::invalid_input, "k_neighbors must be >= 1");

  Rng rng(opt.seed);

  std::vector<Point> src(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    src[static_cast<std::size_t>(i)] = {static_cast<double>(i % root), static_cast<double>(i / root)};
  }
  std::vector<Point> tgt(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    tgt[static_cast<std::size_t>(i)] = {src[static_cast<std::size_t>(i)].x + opt.sigma * rng.normal(),
                                        src[static_cast<std::size_t>(i)].y + opt.sigma * rng.normal()};
  }

  MrfModel m;
  m.node_count = n;
  m.labels.assign(static_cast<std::size_t>(n), n);
  m.unaries.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& u = m.unaries[static_cast<std::size_t>(i)];
    u.resize(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) u[static_cast<std::size_t>(x)] = opt.unary_weight * std::abs(i - x);
  }

  // 4n random source triangles, each matched against its k nearest target
  // triangles under squared side-length-tuple distance.
  const int tri_count = 4 * n;
  std::vector<int> dims = {n, n, n};
  const CliqueShape sh = make_shape(dims);
  const std::uint64_t total_target_tuples =
      static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) * static_cast<std::uint64_t>(n - 2);
  require(static_cast<std::uint64_t>(opt.k_neighbors) <= total_target_tuples, ErrorKind::invalid_input,
          "k_neighbors exceeds the number of distinct target triangles");

  for (int t = 0; t < tri_count; ++t) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    while (b == a) b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    while (c == a || c == b) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int tri[3] = {a, b, c};
    std::sort(tri, tri + 3);

    const double s0 = side_len(src[static_cast<std::size_t>(tri[0])], src[static_cast<std::size_t>(tri[1])]);
    const double s1 = side_len(src[static_cast<std::size_t>(tri[1])], src[static_cast<std::size_t>(tri[2])]);
    const double s2 = side_len(src[static_cast<std::size_t>(tri[2])], src[static_cast<std::size_t>(tri[0])]);

    // distance to every ordered tuple of distinct target points
    std::vector<std::pair<double, std::uint64_t>> cand;
    cand.reserve(static_cast<std::size_t>(total_target_tuples));
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        const double t0 = side_len(tgt[static_cast<std::size_t>(u)], tgt[static_cast<std::size_t>(v)]);
        for (int w = 0; w < n; ++w) {
          if (w == u || w == v) continue;
          const double t1 = side_len(tgt[static_cast<std::size_t>(v)], tgt[static_cast<std::size_t>(w)]);
          const double t2 = side_len(tgt[static_cast<std::size_t>(w)], tgt[static_cast<std::size_t>(u)]);
          const double d = (s0 - t0) * (s0 - t0) + (s1 - t1) * (s1 - t1) + (s2 - t2) * (s2 - t2);
          const std::uint64_t key = sh.strides[0] * static_cast<std::uint64_t>(u) +
                                    sh.strides[1] * static_cast<std::uint64_t>(v) +
                                    sh.strides[2] * static_cast<std::uint64_t>(w);
          cand.emplace_back(d, key);
        }
      }
    }
    const std::size_t k = static_cast<std::size_t>(opt.k_neighbors);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());

    double gamma = 0.0;
    for (std::size_t e = 0; e < k; ++e) gamma += cand[e].first;
    gamma /= static_cast<double>(k);
    if (gamma < 1e-12) gamma = 1e-12;

    PatternPotential pat;
    pat.default_value = 0.0;  // non-neighbor tuples carry no reward
    std::vector<std::pair<std::uint64_t, double>> entries;
    entries.reserve(k);
    for (std::size_t e = 0; e < k; ++e) {
      entries.emplace_back(cand[e].second, -std::exp(-cand[e].first / gamma));
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& [key, val] : entries) {
      pat.keys.push_back(key);
      pat.values.push_back(val);
    }

    Clique cl;
    cl.nodes = {tri[0], tri[1], tri[2]};
    cl.potential = std::move(pat);
    m.cliques.push_back(std::move(cl));
  }
  m.validate();
  return m;
}

MrfModel gen_grid_curvature(const GridCurvatureOptions& opt) {
  require(opt.width >= 3 && opt.height >= 3, ErrorKind::invalid_input,
          "grid must be at least 3x3");
  require(opt.labels >= 1, ErrorKind::invalid_input, "labels must be >= 1");
  require(opt.trunc > 0, ErrorKind::invalid_input, "trunc must be positive");

  Rng rng(opt.seed);
  const int n = opt.width * opt.height;
  MrfModel m;
  m.node_count = n;
  m.labels.assign(static_cast<std::size_t>(n), opt.labels);
  m.unaries.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& u = m.unaries[static_cast<std::size_t>(i)];
    u.resize(static_cast<std::size_t>(opt.labels));
    for (int x = 0; x < opt.labels; ++x) u[static_cast<std::size_t>(x)] = opt.unary_scale * rng.uniform();
  }

  const int l = opt.labels;
  auto curvature_clique = [&](int na, int nb, int nc) {
    PatternPotential pat;
    pat.default_value = opt.trunc;
    for (int xa = 0; xa < l; ++xa) {
      for (int xb = 0; xb < l; ++xb) {
        for (int xc = 0; xc < l; ++xc) {
          const double v = std::abs(static_cast<double>(xa) - 2.0 * xb + xc);
          if (v < opt.trunc) {
            pat.keys.push_back(static_cast<std::uint64_t>((xa * l + xb) * l + xc));
            pat.values.push_back(v);
          }
        }
      }
    }
    Clique cl;
    cl.nodes = {na, nb, nc};
    cl.potential = std::move(pat);
    return cl;
  };

  // horizontal 1x3 cliques row by row, then vertical 3x1 column by column;
  // grid_chain_ids relies on this order
  for (int r = 0; r < opt.height; ++r) {
    for (int c = 0; c + 2 < opt.width; ++c) {
      const int base = r * opt.width + c;
      m.cliques.push_back(curvature_clique(base, base + 1, base + 2));
    }
  }
  for (int c = 0; c < opt.width; ++c) {
    for (int r = 0; r + 2 < opt.height; ++r) {
      const int base = r * opt.width + c;
      m.cliques.push_back(curvature_clique(base, base + opt.width, base + 2 * opt.width));
    }
  }
  m.validate();
  return m;
}

std::vector<std::vector<int>> grid_chain_ids(int width, int height) {
  require(width >= 3 && height >= 3, ErrorKind::invalid_input, "grid must be at least 3x3");
  std::vector<std::vector<int>> chains;
  const int per_row = width - 2;
  const int per_col = height - 2;
  int id = 0;
  for (int r = 0; r < height; ++r) {
    std::vector<int> chain(static_cast<std::size_t>(per_row));
    for (int c = 0; c < per_row; ++c) chain[static_cast<std::size_t>(c)] = id++;
    chains.push_back(std::move(chain));
  }
  for (int c = 0; c < width; ++c) {
    std::vector<int> chain(static_cast<std::size_t>(per_col));
    for (int r = 0; r < per_col; ++r) chain[static_cast<std::size_t>(r)] = id++;
    chains.push_back(std::move(chain));
  }
  return chains;
}

}  // namespace homrf
