#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dmjc/assignment.hpp"
#include "dmjc/autoencoder.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/rng.hpp"
#include "dmjc/training.hpp"

namespace dmjc {

/// Row-wise softmax over views: pi_j^(v) = exp(w_j^(v)) / sum_v' exp(w_j^(v')).
inline Matrix importance_softmax(const Matrix& w) {
  Matrix pi(w.rows(), w.cols());
  for (std::size_t j = 0; j < w.rows(); ++j) {
    auto in = w.row(j);
    auto out = pi.row(j);
    const double top = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t v = 0; v < in.size(); ++v) {
      out[v] = std::exp(in[v] - top);
      sum += out[v];
    }
    for (double& x : out) x /= sum;
  }
  return pi;
}

/// Intermediate quantities of the weighted multi-view assignment for one
/// batch. share[v](i,j) = s_ij^(v) / S_i where s_ij^(v) = pi_j^(v) t_ij^(v) and
/// S_i sums s over all clusters and views; q(i,j) = sum_v share[v](i,j).
struct MultiViewTerms {
  Matrix q;
  std::vector<Matrix> share;
  std::vector<Matrix> dist;  // d_ij^(v) = |z_i^(v) - mu_j^(v)|^2 / alpha
};

namespace detail {

inline void check_views(std::span<const Matrix> z, std::span<const Matrix> mu, std::size_t k_expected,
                        const char* who) {
  require(!z.empty(), Errc::invalid_argument, std::string(who) + ": no views");
  require(z.size() == mu.size(), Errc::shape_mismatch,
          std::string(who) + ": embeddings and centroids disagree on view count");
  for (std::size_t v = 0; v < z.size(); ++v) {
    require(z[v].rows() == z[0].rows(), Errc::shape_mismatch,
            std::string(who) + ": views disagree on sample count");
    require(mu[v].rows() == k_expected, Errc::shape_mismatch,
            std::string(who) + ": views disagree on cluster count");
    require(z[v].cols() == mu[v].cols(), Errc::shape_mismatch,
            std::string(who) + ": view " + std::to_string(v + 1) + " embedding/centroid dim mismatch");
  }
}

}  // namespace detail

inline MultiViewTerms multiview_terms(std::span<const Matrix> z, std::span<const Matrix> mu,
                                      const Matrix& pi, double alpha) {
  const std::size_t views = z.size();
  const std::size_t k = mu.empty() ? 0 : mu[0].rows();
  require(k > 0, Errc::invalid_argument, "multiview_soft_assignment: K = 0");
  require(alpha > 0.0, Errc::invalid_argument, "multiview_soft_assignment: alpha must be > 0");
  detail::check_views(z, mu, k, "multiview_soft_assignment");
  require(pi.rows() == k && pi.cols() == views, Errc::shape_mismatch,
          "multiview_soft_assignment: importance weights must be [K x V]");
  const std::size_t n = z[0].rows();

  MultiViewTerms t{Matrix(n, k), std::vector<Matrix>(views, Matrix(n, k)),
                   std::vector<Matrix>(views, Matrix(n, k))};
  std::vector<double> log_s(k * views);
  for (std::size_t i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < views; ++v)
      for (std::size_t j = 0; j < k; ++j) {
        const double d2 = squared_distance(z[v].row(i), mu[v].row(j));
        t.dist[v](i, j) = d2 / alpha;
        double& ls = log_s[v * k + j];
        ls = log_student_kernel(d2, alpha) + std::log(pi(j, v));
        top = std::max(top, ls);
      }
    double total = 0.0;
    for (double& ls : log_s) {
      ls = std::exp(ls - top);
      total += ls;
    }
    for (std::size_t v = 0; v < views; ++v)
      for (std::size_t j = 0; j < k; ++j) {
        const double sh = log_s[v * k + j] / total;
        t.share[v](i, j) = sh;
        t.q(i, j) += sh;
      }
  }
  return t;
}

/// Multi-view soft assignment: per-cluster importance-weighted sum of the
/// per-view Student's t kernels, normalized over clusters and views.
inline Matrix multiview_soft_assignment(std::span<const Matrix> z, std::span<const Matrix> mu,
                                        const Matrix& pi, double alpha) {
  return multiview_terms(z, mu, pi, alpha).q;
}

struct DmjcSGradients {
  double loss = 0.0;         // sum_i KL(P_i || Q_i)
  std::vector<Matrix> d_z;   // per view [N x D_v]
  std::vector<Matrix> d_mu;  // per view [K x D_v]
  Matrix d_w;                // [K x V]
};

/// Gradients of sum_i KL(P_i || Q_i) for the multi-view assignment with P
/// fixed. Through the chain rule with dL/dq_ij = -p_ij / q_ij:
///   dL/dd_ij^(v) = (a+1)/2 * share_ij^(v) / (1 + d_ij^(v)) * (p_ij / q_ij - sum_j' p_ij')
///   dL/dz_i^(v)  =  2/a sum_j dL/dd_ij^(v) (z_i^(v) - mu_j^(v))
///   dL/dmu_j^(v) = -2/a sum_i dL/dd_ij^(v) (z_i^(v) - mu_j^(v))
/// and, with r_j^(v) = pi_j^(v) dL/dpi_j^(v) = sum_i share_ij^(v) (sum_j' p_ij' - p_ij / q_ij),
///   dL/dw_j^(v)  = r_j^(v) - pi_j^(v) sum_v' r_j^(v')   (softmax Jacobian).
inline DmjcSGradients dmjc_s_gradients(std::span<const Matrix> z, std::span<const Matrix> mu,
                                       const Matrix& w, const Matrix& p, double alpha) {
  const Matrix pi = importance_softmax(w);
  const auto t = multiview_terms(z, mu, pi, alpha);
  require(p.same_shape(t.q), Errc::shape_mismatch, "dmjc_s_gradients: P shape mismatch");
  const std::size_t views = z.size();
  const std::size_t n = t.q.rows();
  const std::size_t k = t.q.cols();

  DmjcSGradients g;
  g.loss = kl_loss(p, t.q);
  Matrix ratio(n, k);  // p_ij / q_ij - sum_j' p_ij'
  for (std::size_t i = 0; i < n; ++i) {
    double psum = 0.0;
    for (double v : p.row(i)) psum += v;
    for (std::size_t j = 0; j < k; ++j)
      ratio(i, j) = p(i, j) / std::max(t.q(i, j), kProbFloor) - psum;
  }

  Matrix r(k, views);
  const double half = 0.5 * (alpha + 1.0);
  for (std::size_t v = 0; v < views; ++v) {
    Matrix dz(n, z[v].cols());
    Matrix dmu(k, mu[v].cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto zi = z[v].row(i);
      auto gz = dz.row(i);
      for (std::size_t j = 0; j < k; ++j) {
        const double sh = t.share[v](i, j);
        r(j, v) -= sh * ratio(i, j);
        const double dl_dd = half * sh / (1.0 + t.dist[v](i, j)) * ratio(i, j);
        const double coef = 2.0 / alpha * dl_dd;
        auto mj = mu[v].row(j);
        auto gm = dmu.row(j);
        for (std::size_t d = 0; d < zi.size(); ++d) {
          const double s = coef * (zi[d] - mj[d]);
          gz[d] += s;
          gm[d] -= s;
        }
      }
    }
    require(all_finite(dz) && all_finite(dmu), Errc::non_finite,
            "dmjc_s_gradients: non-finite gradient in view " + std::to_string(v + 1));
    g.d_z.push_back(std::move(dz));
    g.d_mu.push_back(std::move(dmu));
  }

  g.d_w = Matrix(k, views);
  for (std::size_t j = 0; j < k; ++j) {
    double total = 0.0;
    for (std::size_t v = 0; v < views; ++v) total += r(j, v);
    for (std::size_t v = 0; v < views; ++v) g.d_w(j, v) = r(j, v) - pi(j, v) * total;
  }
  return g;
}

struct DmjcSModel {
  std::vector<MlpParams> encoders;
  std::vector<Matrix> centroids;  // per view [K x D_v]
  Matrix w;                       // [K x V] unconstrained importance weights

  /// Zero weights, so every pi_j^(v) starts at exactly 1/V.
  static DmjcSModel initial(std::vector<MlpParams> encoders, std::vector<Matrix> centroids) {
    const std::size_t k = centroids.empty() ? 0 : centroids.front().rows();
    const std::size_t views = centroids.size();
    return {std::move(encoders), std::move(centroids), Matrix(k, views)};
  }

  std::size_t views() const noexcept { return encoders.size(); }
  std::size_t clusters() const noexcept { return w.rows(); }
};

struct DmjcSResult {
  DmjcSModel model;
  TrainHistory history;
  Matrix q;
  std::vector<std::size_t> labels;
  double final_loss = 0.0;
};

namespace detail {

inline std::vector<Matrix> encode_views(const std::vector<MlpParams>& encoders,
                                        std::span<const Matrix> data) {
  require(encoders.size() == data.size(), Errc::shape_mismatch,
          "model has " + std::to_string(encoders.size()) + " views, data has " +
              std::to_string(data.size()));
  std::vector<Matrix> z;
  for (std::size_t v = 0; v < data.size(); ++v) z.push_back(encode(encoders[v], data[v]));
  return z;
}

inline std::size_t common_rows(std::span<const Matrix> data) {
  require(!data.empty(), Errc::invalid_argument, "no views supplied");
  for (const auto& d : data)
    require(d.rows() == data[0].rows(), Errc::shape_mismatch, "views disagree on sample count");
  return data[0].rows();
}

}  // namespace detail

/// Predicted cluster per sample: argmax of the multi-view assignment.
inline std::vector<std::size_t> predict_s(const DmjcSModel& model, std::span<const Matrix> data,
                                          double alpha) {
  const auto z = detail::encode_views(model.encoders, data);
  return row_argmax(multiview_soft_assignment(z, model.centroids, importance_softmax(model.w), alpha));
}

/// Joint training of all encoders, per-view centroids and the importance
/// weights on the multi-view KL objective. Target refresh and stopping rules
/// match dec_train; with a single view the two produce the same trajectory.
inline DmjcSResult dmjc_s_train(DmjcSModel model, std::span<const Matrix> data,
                                const JointOptions& opt, Rng& rng) {
  const std::size_t n = detail::common_rows(data);
  require(n > 0, Errc::invalid_argument, "dmjc_s_train: empty data");
  opt.validate(n);
  require(model.w.rows() == model.centroids.front().rows() && model.w.cols() == model.views(),
          Errc::shape_mismatch, "dmjc_s_train: weight matrix must be [K x V]");
  const auto& h = opt.hyper;
  const std::size_t views = model.views();

  Optimizer optim(opt.optimizer);
  std::vector<Matrix*> params;
  for (std::size_t v = 0; v < views; ++v) {
    for (auto* p : model.encoders[v].encoder_parameters()) params.push_back(p);
    params.push_back(&model.centroids[v]);
  }
  params.push_back(&model.w);

  DmjcSResult out;
  Matrix p;
  std::vector<std::size_t> last_labels;

  for (std::size_t epoch = 0; epoch < h.max_epochs; ++epoch) {
    const auto z = detail::encode_views(model.encoders, data);
    const Matrix pi = importance_softmax(model.w);
    const Matrix q = multiview_soft_assignment(z, model.centroids, pi, h.alpha);
    const auto labels = row_argmax(q);
    double change = 1.0;
    if (epoch % h.update_interval == 0) {
      p = target_distribution(q, h.gamma);
      if (!last_labels.empty()) {
        change = detail::label_change_fraction(labels, last_labels);
        if (change < h.label_change_tol) {
          out.history.converged = true;
          break;
        }
      }
      last_labels = labels;
    }
    const double loss = kl_loss(p, q);
    detail::check_finite_loss(loss, epoch, "dmjc_s_train");

    EpochRecord rec{epoch, loss, change, std::vector<double>(views, 0.0), {}, std::nullopt};
    for (std::size_t v = 0; v < views; ++v)
      for (std::size_t j = 0; j < pi.rows(); ++j) rec.view_weights[v] += pi(j, v);
    if (!opt.truth.empty()) {
      for (std::size_t v = 0; v < views; ++v)
        rec.view_acc.push_back(detail::accuracy_of(
            row_argmax(soft_assignment(z[v], model.centroids[v], h.alpha)), opt.truth));
      rec.fused_acc = detail::accuracy_of(labels, opt.truth);
    }
    out.history.epochs.push_back(std::move(rec));
    if (opt.observer) opt.observer(EpochSnapshot{epoch, {q}, {p}, pi});

    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const auto idx = detail::batch_slice(order, start, opt.batch_size);
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      std::vector<EncoderPass> passes;
      std::vector<Matrix> zb;
      passes.reserve(views);
      for (std::size_t v = 0; v < views; ++v) {
        passes.emplace_back(model.encoders[v], select_rows(data[v], idx));
        zb.push_back(passes.back().embedding());
      }
      auto g = dmjc_s_gradients(zb, model.centroids, model.w, select_rows(p, idx), h.alpha);
      std::vector<Matrix> grads;
      for (std::size_t v = 0; v < views; ++v) {
        g.d_z[v] *= inv_b;
        g.d_mu[v] *= inv_b;
        for (auto& gp : passes[v].backward(g.d_z[v])) grads.push_back(std::move(gp));
        grads.push_back(std::move(g.d_mu[v]));
      }
      g.d_w *= inv_b;
      grads.push_back(std::move(g.d_w));
      detail::diverge_on_non_finite([&] { optim.step(params, grads); }, "dmjc_s_train");
    }
  }

  const auto z = detail::encode_views(model.encoders, data);
  out.q = multiview_soft_assignment(z, model.centroids, importance_softmax(model.w), h.alpha);
  out.labels = row_argmax(out.q);
  if (p.empty()) p = target_distribution(out.q, h.gamma);
  out.final_loss = kl_loss(p, out.q);
  out.model = std::move(model);
  return out;
}

}  // namespace dmjc
