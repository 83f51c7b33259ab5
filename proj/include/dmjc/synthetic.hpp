#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/metrics.hpp"
#include "dmjc/rng.hpp"

namespace dmjc {

using ClusterPair = std::pair<std::size_t, std::size_t>;

/// Gaussian-blob multi-view data. In view v, every pair listed in
/// merges[v] shares one mean, so that view cannot tell them apart.
struct SyntheticSpec {
  std::size_t views = 3;
  std::size_t clusters = 4;
  std::size_t n_per_cluster = 150;
  std::vector<std::vector<ClusterPair>> merges;  // one list per view
  std::size_t dim = 8;
  double separation = 6.0;  // center scale
  double noise = 1.0;       // per-coordinate standard deviation

  /// View v merges (c, c+1) with c = v mod (K-1). If that leaves some pair
  /// merged everywhere, the last view keeps all clusters apart. A single
  /// view gets no merges.
  static SyntheticSpec complementary(std::size_t views, std::size_t clusters,
                                     std::size_t n_per_cluster);
};

struct SyntheticData {
  std::vector<Matrix> views;
  std::vector<Label> labels;
};

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

inline std::vector<UnionFind> merge_groups(const SyntheticSpec& s) {
  std::vector<UnionFind> groups(s.views, UnionFind(s.clusters));
  for (std::size_t v = 0; v < s.views && v < s.merges.size(); ++v)
    for (auto [a, b] : s.merges[v]) {
      require(a < s.clusters && b < s.clusters, Errc::invalid_argument,
              "synthetic: merge pair references a cluster >= K");
      groups[v].unite(a, b);
    }
  return groups;
}

}  // namespace detail

/// True when every cluster pair is separated in at least one view.
inline bool plan_feasible(const SyntheticSpec& s) {
  auto groups = detail::merge_groups(s);
  for (std::size_t a = 0; a < s.clusters; ++a)
    for (std::size_t b = a + 1; b < s.clusters; ++b) {
      bool separated = false;
      for (auto& g : groups) separated = separated || g.find(a) != g.find(b);
      if (!separated) return false;
    }
  return true;
}

inline SyntheticSpec SyntheticSpec::complementary(std::size_t views, std::size_t clusters,
                                                  std::size_t n_per_cluster) {
  SyntheticSpec s;
  s.views = views;
  s.clusters = clusters;
  s.n_per_cluster = n_per_cluster;
  s.merges.assign(views, {});
  if (views >= 2 && clusters >= 2) {
    for (std::size_t v = 0; v < views; ++v) {
      const std::size_t c = v % (clusters - 1);
      s.merges[v].push_back({c, c + 1});
    }
    if (!plan_feasible(s)) s.merges.back().clear();
  }
  return s;
}

/// Draws the views. Cluster means per view are K orthogonal directions of
/// length `separation` (random normal directions when K > dim); merged
/// clusters reuse their group's mean. Samples are ordered by cluster.
inline SyntheticData make_synthetic(const SyntheticSpec& s, Rng& rng) {
  require(s.views >= 1 && s.clusters >= 1 && s.n_per_cluster >= 1 && s.dim >= 1,
          Errc::invalid_argument, "synthetic: views, clusters, n and dim must be >= 1");
  require(s.merges.empty() || s.merges.size() == s.views, Errc::invalid_argument,
          "synthetic: merge plan needs one entry per view");
  require(plan_feasible(s), Errc::invalid_argument,
          "synthetic: infeasible plan, some cluster pair is merged in every view");

  auto groups = detail::merge_groups(s);
  const std::size_t n = s.clusters * s.n_per_cluster;
  SyntheticData out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = i / s.n_per_cluster;

  for (std::size_t v = 0; v < s.views; ++v) {
    Matrix centers(s.clusters, s.dim);
    for (double& x : centers.values()) x = rng.normal();
    if (s.clusters <= s.dim) {
      // Gram-Schmidt to orthonormal rows.
      for (std::size_t j = 0; j < s.clusters; ++j) {
        auto cj = centers.row(j);
        for (std::size_t k = 0; k < j; ++k) {
          auto ck = centers.row(k);
          double dot = 0.0;
          for (std::size_t d = 0; d < s.dim; ++d) dot += cj[d] * ck[d];
          for (std::size_t d = 0; d < s.dim; ++d) cj[d] -= dot * ck[d];
        }
        double norm = 0.0;
        for (double x : cj) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : cj) x /= norm;
      }
    }
    centers *= s.separation;

    Matrix x(n, s.dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = centers.row(groups[v].find(out.labels[i]));
      auto r = x.row(i);
      for (std::size_t d = 0; d < s.dim; ++d) r[d] = c[d] + s.noise * rng.normal();
    }
    out.views.push_back(std::move(x));
  }
  return out;
}

}  // namespace dmjc
