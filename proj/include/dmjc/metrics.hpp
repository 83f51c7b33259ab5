#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "dmjc/error.hpp"

namespace dmjc {

using Label = std::size_t;

/// Min-cost perfect assignment on a square cost matrix (row-major n*n),
/// shortest augmenting path form of the Hungarian method, O(n^3).
/// Returns the column assigned to each row.
inline std::vector<std::size_t> hungarian_min_cost(std::span<const double> cost, std::size_t n) {
  require(cost.size() == n * n, Errc::shape_mismatch, "hungarian: cost matrix is not n*n");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

/// Contingency counts between two labelings, with labels compressed to
/// dense indices in ascending label order.
struct Contingency {
  std::size_t n = 0;
  std::size_t rows = 0;  // distinct pred labels
  std::size_t cols = 0;  // distinct truth labels
  std::vector<double> counts;  // rows*cols
  std::vector<double> row_sums;
  std::vector<double> col_sums;

  double at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
};

inline Contingency contingency(std::span<const Label> pred, std::span<const Label> truth) {
  require(pred.size() == truth.size(), Errc::shape_mismatch,
          "metrics: prediction has " + std::to_string(pred.size()) + " labels, truth has " +
              std::to_string(truth.size()));
  std::map<Label, std::size_t> pidx, tidx;
  for (auto l : pred) pidx.emplace(l, 0);
  for (auto l : truth) tidx.emplace(l, 0);
  std::size_t k = 0;
  for (auto& [l, i] : pidx) i = k++;
  k = 0;
  for (auto& [l, i] : tidx) i = k++;

  Contingency c;
  c.n = pred.size();
  c.rows = pidx.size();
  c.cols = tidx.size();
  c.counts.assign(c.rows * c.cols, 0.0);
  c.row_sums.assign(c.rows, 0.0);
  c.col_sums.assign(c.cols, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto r = pidx[pred[i]];
    const auto col = tidx[truth[i]];
    c.counts[r * c.cols + col] += 1.0;
    c.row_sums[r] += 1.0;
    c.col_sums[col] += 1.0;
  }
  return c;
}

/// Best one-to-one cluster/class matching accuracy. Unequal cluster and
/// class counts are handled by zero-padding the contingency to square.
inline double clustering_accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  require(!pred.empty(), Errc::invalid_argument, "clustering_accuracy: empty labels");
  const auto c = contingency(pred, truth);
  const std::size_t n = std::max(c.rows, c.cols);
  std::vector<double> cost(n * n, 0.0);
  double top = 0.0;
  for (double v : c.counts) top = std::max(top, v);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t col = 0; col < n; ++col)
      cost[r * n + col] = top - (r < c.rows && col < c.cols ? c.at(r, col) : 0.0);
  const auto match = hungarian_min_cost(cost, n);
  double hit = 0.0;
  for (std::size_t r = 0; r < c.rows; ++r)
    if (match[r] < c.cols) hit += c.at(r, match[r]);
  return hit / static_cast<double>(c.n);
}

/// Mutual information normalized by the geometric mean of the two
/// entropies (natural log). A zero entropy on either side gives 0.
inline double nmi(std::span<const Label> pred, std::span<const Label> truth) {
  const auto c = contingency(pred, truth);
  if (c.n == 0) return 0.0;
  const double n = static_cast<double>(c.n);
  auto entropy = [n](const std::vector<double>& sums) {
    double h = 0.0;
    for (double s : sums)
      if (s > 0.0) h -= (s / n) * std::log(s / n);
    return h;
  };
  const double hp = entropy(c.row_sums);
  const double ht = entropy(c.col_sums);
  if (hp <= 0.0 || ht <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < c.rows; ++r)
    for (std::size_t col = 0; col < c.cols; ++col) {
      const double nij = c.at(r, col);
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (c.row_sums[r] * c.col_sums[col]));
    }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

/// Adjusted Rand index (permutation model). Degenerate inputs where the
/// index is undefined (N < 2, or both sides trivially equal) return 1.
inline double ari(std::span<const Label> pred, std::span<const Label> truth) {
  const auto c = contingency(pred, truth);
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  if (c.n < 2) return 1.0;
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (double v : c.counts) sum_ij += pairs(v);
  for (double v : c.row_sums) sum_a += pairs(v);
  for (double v : c.col_sums) sum_b += pairs(v);
  const double expected = sum_a * sum_b / pairs(static_cast<double>(c.n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace dmjc
