#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/rng.hpp"

namespace dmjc {

struct KmeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;      // on the summed squared centroid shift
  std::size_t n_init = 10;
};

struct KmeansResult {
  Matrix centroids;                   // [K x D]
  std::vector<std::size_t> labels;    // length N
  double inertia = 0.0;
  std::vector<double> inertia_history;  // per Lloyd iteration, winning restart
  std::size_t iterations = 0;
};

/// Nearest centroid per row; ties go to the lowest index.
inline std::vector<std::size_t> assign(const Matrix& centroids, const Matrix& data) {
  require(centroids.rows() > 0, Errc::invalid_argument, "assign: no centroids");
  require(centroids.cols() == data.cols(), Errc::shape_mismatch,
          "assign: centroid dim " + std::to_string(centroids.cols()) + " vs data dim " +
              std::to_string(data.cols()));
  std::vector<std::size_t> labels(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      const double d = squared_distance(data.row(i), centroids.row(j));
      if (d < best) {
        best = d;
        labels[i] = j;
      }
    }
  }
  return labels;
}

inline double inertia(const Matrix& centroids, const Matrix& data,
                      const std::vector<std::size_t>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i)
    s += squared_distance(data.row(i), centroids.row(labels[i]));
  return s;
}

/// Per-cluster means of `data` under `labels`. Clusters with no members keep
/// a zero row; `counts` receives the member counts.
inline Matrix cluster_means(const Matrix& data, const std::vector<std::size_t>& labels,
                            std::size_t k, std::vector<std::size_t>& counts) {
  require(labels.size() == data.rows(), Errc::shape_mismatch, "cluster_means: label count");
  Matrix means(k, data.cols());
  counts.assign(k, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    require(labels[i] < k, Errc::invalid_argument, "cluster_means: label out of range");
    ++counts[labels[i]];
    auto m = means.row(labels[i]);
    auto x = data.row(i);
    for (std::size_t d = 0; d < x.size(); ++d) m[d] += x[d];
  }
  for (std::size_t j = 0; j < k; ++j)
    if (counts[j] > 0)
      for (double& v : means.row(j)) v /= static_cast<double>(counts[j]);
  return means;
}

namespace detail {

inline Matrix kmeanspp_seed(const Matrix& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.rows();
  Matrix c(k, data.cols());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy(data.row(first).begin(), data.row(first).end(), c.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data.row(i), c.row(0));
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy(data.row(pick).begin(), data.row(pick).end(), c.row(j).begin());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(data.row(i), c.row(j)));
  }
  return c;
}

/// Moves each empty cluster's centroid onto the point farthest from its
/// current centroid, one distinct point per empty cluster.
inline void reseed_empty(const Matrix& data, Matrix& centroids, std::vector<std::size_t>& labels,
                         const std::vector<std::size_t>& counts) {
  std::vector<char> taken(data.rows(), 0);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] > 0) continue;
    std::size_t far = data.rows();
    double best = -1.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (taken[i]) continue;
      const double d = squared_distance(data.row(i), centroids.row(labels[i]));
      if (d > best) {
        best = d;
        far = i;
      }
    }
    if (far == data.rows()) break;
    taken[far] = 1;
    std::copy(data.row(far).begin(), data.row(far).end(), centroids.row(j).begin());
    labels[far] = j;
  }
}

inline KmeansResult lloyd(const Matrix& data, Matrix centroids, const KmeansOptions& opt) {
  const std::size_t k = centroids.rows();
  KmeansResult r;
  r.labels = assign(centroids, data);
  r.inertia_history.push_back(inertia(centroids, data, r.labels));
  std::vector<std::size_t> counts;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    Matrix next = cluster_means(data, r.labels, k, counts);
    for (std::size_t j = 0; j < k; ++j)
      if (counts[j] == 0)
        std::copy(centroids.row(j).begin(), centroids.row(j).end(), next.row(j).begin());
    reseed_empty(data, next, r.labels, counts);
    const double shift = squared_norm(next - centroids);
    centroids = std::move(next);
    r.labels = assign(centroids, data);
    r.inertia_history.push_back(inertia(centroids, data, r.labels));
    r.iterations = it + 1;
    if (shift < opt.tol) break;
  }
  r.centroids = std::move(centroids);
  r.inertia = r.inertia_history.back();
  return r;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations; keeps the restart with
/// the lowest inertia.
inline KmeansResult kmeans(const Matrix& data, std::size_t k, Rng& rng,
                           const KmeansOptions& opt = {}) {
  require(data.rows() > 0, Errc::invalid_argument, "kmeans: empty data");
  require(k >= 1, Errc::invalid_argument, "kmeans: K must be >= 1");
  require(k <= data.rows(), Errc::invalid_argument,
          "kmeans: K=" + std::to_string(k) + " exceeds N=" + std::to_string(data.rows()));
  KmeansResult best;
  bool have = false;
  for (std::size_t run = 0; run < std::max<std::size_t>(1, opt.n_init); ++run) {
    auto r = detail::lloyd(data, detail::kmeanspp_seed(data, k, rng), opt);
    if (!have || r.inertia < best.inertia) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace dmjc
