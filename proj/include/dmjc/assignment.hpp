#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/kmeans.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/rng.hpp"

namespace dmjc {

/// Floor applied to q before any log or division.
inline constexpr double kProbFloor = 1e-12;

struct DecHyper {
  double alpha = 1.0;               // Student's t degrees of freedom
  double gamma = 2.0;               // target sharpening exponent
  std::size_t update_interval = 1;  // epochs between target refreshes
  std::size_t max_epochs = 100;
  double label_change_tol = 0.001;

  void validate() const {
    require(alpha > 0.0, Errc::invalid_argument, "DecHyper: alpha must be > 0");
    require(gamma > 1.0, Errc::invalid_argument, "DecHyper: gamma must be > 1");
    require(update_interval >= 1, Errc::invalid_argument, "DecHyper: update_interval must be >= 1");
    require(label_change_tol >= 0.0 && label_change_tol <= 1.0, Errc::invalid_argument,
            "DecHyper: label_change_tol must lie in [0,1]");
  }

  bool operator==(const DecHyper&) const = default;
};

/// log of the unnormalized Student's t kernel, -(alpha+1)/2 * log(1 + d2/alpha).
inline double log_student_kernel(double squared_dist, double alpha) noexcept {
  return -0.5 * (alpha + 1.0) * std::log1p(squared_dist / alpha);
}

/// Student's t soft assignment of each embedded row to each centroid,
/// normalized per row. Computed in log space, so far-away rows do not
/// underflow to an all-zero row.
inline Matrix soft_assignment(const Matrix& z, const Matrix& centroids, double alpha) {
  require(centroids.rows() > 0, Errc::invalid_argument, "soft_assignment: K = 0");
  require(alpha > 0.0, Errc::invalid_argument, "soft_assignment: alpha must be > 0");
  require(z.cols() == centroids.cols(), Errc::shape_mismatch,
          "soft_assignment: embedding dim " + std::to_string(z.cols()) + " vs centroid dim " +
              std::to_string(centroids.cols()));
  const std::size_t k = centroids.rows();
  Matrix q(z.rows(), k);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = q.row(i);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = log_student_kernel(squared_distance(z.row(i), centroids.row(j)), alpha);
      top = std::max(top, row[j]);
    }
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - top);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return q;
}

/// Row-normalized elementwise power q^gamma.
inline Matrix target_distribution(const Matrix& q, double gamma) {
  require(gamma > 1.0, Errc::invalid_argument, "target_distribution: gamma must be > 1");
  Matrix p(q.rows(), q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto in = q.row(i);
    auto out = p.row(i);
    // Scale by the row max first; argmax entries stay at exactly 1 before normalizing.
    const double top = in.empty() ? 0.0 : *std::max_element(in.begin(), in.end());
    require(top > 0.0, Errc::non_finite, "target_distribution: all-zero row " + std::to_string(i));
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::pow(in[j] / top, gamma);
      sum += out[j];
    }
    for (double& v : out) v /= sum;
  }
  return p;
}

/// sum_ij p_ij log(p_ij / q_ij) with 0 log 0 = 0 and q floored at kProbFloor.
inline double kl_loss(const Matrix& p, const Matrix& q) {
  require(p.same_shape(q), Errc::shape_mismatch,
          "kl_loss: P " + p.shape_str() + " vs Q " + q.shape_str());
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pv = p.values()[k];
    if (pv > 0.0) s += pv * std::log(pv / std::max(q.values()[k], kProbFloor));
  }
  return s;
}

struct AssignmentGradients {
  Matrix d_z;   // [N x D]
  Matrix d_mu;  // [K x D]
};

/// Gradients of sum_i KL(P_i || Q_i) with P held fixed, for the single-view
/// Student's t assignment:
///   dL/dz_i  =  (a+1)/a sum_j (1 + |z_i-mu_j|^2/a)^-1 (p_ij - q_ij)(z_i - mu_j)
///   dL/dmu_j = -(a+1)/a sum_i (1 + |z_i-mu_j|^2/a)^-1 (p_ij - q_ij)(z_i - mu_j)
/// Assumes each P row sums to one.
inline AssignmentGradients kl_assignment_gradients(const Matrix& z, const Matrix& centroids,
                                                   const Matrix& q, const Matrix& p,
                                                   double alpha) {
  require(z.cols() == centroids.cols(), Errc::shape_mismatch, "kl gradients: dim mismatch");
  require(q.rows() == z.rows() && q.cols() == centroids.rows() && p.same_shape(q),
          Errc::shape_mismatch, "kl gradients: Q/P shape mismatch");
  const double scale = (alpha + 1.0) / alpha;
  AssignmentGradients g{Matrix(z.rows(), z.cols()), Matrix(centroids.rows(), centroids.cols())};
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zi = z.row(i);
    auto gz = g.d_z.row(i);
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      auto mj = centroids.row(j);
      const double coef =
          scale * (p(i, j) - q(i, j)) / (1.0 + squared_distance(zi, mj) / alpha);
      auto gm = g.d_mu.row(j);
      for (std::size_t d = 0; d < zi.size(); ++d) {
        const double t = coef * (zi[d] - mj[d]);
        gz[d] += t;
        gm[d] -= t;
      }
    }
  }
  return g;
}

struct ViewCentroids {
  std::vector<Matrix> centroids;     // per view, [K x D_v]
  std::vector<std::size_t> labels;   // concatenated K-means labels
};

/// K-means on the column-concatenated embeddings, then per-view centroids
/// as the per-view means of each cluster's members.
inline ViewCentroids init_view_centroids(std::span<const Matrix> embeddings, std::size_t k,
                                         Rng& rng, const KmeansOptions& opt = {}) {
  require(!embeddings.empty(), Errc::invalid_argument, "init_view_centroids: no views");
  const std::size_t n = embeddings.front().rows();
  for (const auto& e : embeddings)
    require(e.rows() == n, Errc::shape_mismatch,
            "init_view_centroids: views disagree on sample count");
  const Matrix joint = embeddings.size() == 1 ? embeddings.front() : hconcat(embeddings);
  auto km = kmeans(joint, k, rng, opt);
  ViewCentroids out;
  out.labels = std::move(km.labels);
  std::vector<std::size_t> counts;
  for (const auto& e : embeddings) {
    out.centroids.push_back(cluster_means(e, out.labels, k, counts));
    for (auto c : counts)
      require(c > 0, Errc::non_finite, "init_view_centroids: K-means left an empty cluster");
  }
  return out;
}

}  // namespace dmjc
