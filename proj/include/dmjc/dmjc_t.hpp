#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dmjc/assignment.hpp"
#include "dmjc/autoencoder.hpp"
#include "dmjc/dmjc_s.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/rng.hpp"
#include "dmjc/simplex.hpp"
#include "dmjc/training.hpp"

namespace dmjc {

/// Global per-view target weights, kept strictly inside the simplex.
struct ViewWeights {
  std::vector<double> w;
  double lambda = 2.0e4;

  static ViewWeights uniform(std::size_t views, double lambda) {
    return {std::vector<double>(views, 1.0 / static_cast<double>(views)), lambda};
  }

  bool valid(double tol = 1e-10) const {
    if (w.empty() || lambda < 0.0) return false;
    double s = 0.0;
    for (double x : w) {
      if (!(x > 0.0)) return false;
      s += x;
    }
    return std::abs(s - 1.0) <= tol;
  }
};

struct ApgConfig {
  std::size_t max_iter = 500;
  double step_init = 1.0;
  double backtrack_factor = 0.5;
  double rel_tol = 1e-8;

  void validate() const {
    require(max_iter > 0 && step_init > 0.0 && rel_tol > 0.0, Errc::invalid_argument,
            "ApgConfig: max_iter, step_init and rel_tol must be positive");
    require(backtrack_factor > 0.0 && backtrack_factor < 1.0, Errc::invalid_argument,
            "ApgConfig: backtrack_factor must lie in (0,1)");
  }

  bool operator==(const ApgConfig&) const = default;
};

/// p_ij = sum_v w_v p_ij^(v).
inline Matrix fused_target(std::span<const Matrix> p_views, std::span<const double> w) {
  require(!p_views.empty(), Errc::invalid_argument, "fused_target: no views");
  require(p_views.size() == w.size(), Errc::shape_mismatch,
          "fused_target: " + std::to_string(p_views.size()) + " targets but " +
              std::to_string(w.size()) + " weights");
  Matrix p(p_views[0].rows(), p_views[0].cols());
  for (std::size_t v = 0; v < p_views.size(); ++v) {
    require(p_views[v].same_shape(p), Errc::shape_mismatch, "fused_target: view shape mismatch");
    auto out = p.values();
    auto in = p_views[v].values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w[v] * in[k];
  }
  return p;
}

/// sum_v' KL(P || Q^(v')) + lambda |w|^2 for an already fused P.
inline double fused_objective(const Matrix& p, std::span<const Matrix> q_views,
                              std::span<const double> w, double lambda) {
  double s = 0.0;
  for (const auto& q : q_views) s += kl_loss(p, q);
  for (double x : w) s += lambda * x * x;
  return s;
}

/// Explicit-fusion objective: every view's soft assignment is compared to
/// the weighted target, plus the l2 penalty on the weights.
inline double objective_t(std::span<const Matrix> p_views, std::span<const Matrix> q_views,
                          std::span<const double> w, double lambda) {
  require(p_views.size() == q_views.size(), Errc::shape_mismatch,
          "objective_t: P and Q view counts differ");
  return fused_objective(fused_target(p_views, w), q_views, w, lambda);
}

/// The weight subproblem with per-view P and Q frozen. Precomputes
/// sum_v' log q^(v') so each evaluation costs one pass over the fused P.
class WeightObjective {
 public:
  WeightObjective(std::span<const Matrix> p_views, std::span<const Matrix> q_views, double lambda)
      : p_views_(p_views), lambda_(lambda), views_(static_cast<double>(q_views.size())) {
    require(!p_views.empty() && p_views.size() == q_views.size(), Errc::shape_mismatch,
            "weight objective: need matching, non-empty P and Q view lists");
    require(lambda >= 0.0, Errc::invalid_argument, "weight objective: lambda must be >= 0");
    sum_log_q_ = Matrix(p_views[0].rows(), p_views[0].cols());
    for (std::size_t v = 0; v < q_views.size(); ++v) {
      require(q_views[v].same_shape(sum_log_q_) && p_views[v].same_shape(sum_log_q_),
              Errc::shape_mismatch, "weight objective: view shape mismatch");
      auto acc = sum_log_q_.values();
      auto q = q_views[v].values();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::log(std::max(q[k], kProbFloor));
    }
  }

  std::size_t views() const noexcept { return p_views_.size(); }

  double value(std::span<const double> w) const {
    const Matrix p = fused_target(p_views_, w);
    double s = 0.0;
    auto pv = p.values();
    auto lq = sum_log_q_.values();
    for (std::size_t k = 0; k < pv.size(); ++k)
      if (pv[k] > 0.0) s += pv[k] * (views_ * std::log(pv[k]) - lq[k]);
    for (double x : w) s += lambda_ * x * x;
    return s;
  }

  /// d/dw_v = sum_ij p_ij^(v) (sum_v' log(p_ij / q_ij^(v')) + V) + 2 lambda w_v.
  std::vector<double> gradient(std::span<const double> w) const {
    const Matrix p = fused_target(p_views_, w);
    Matrix inner(p.rows(), p.cols());
    auto pv = p.values();
    auto lq = sum_log_q_.values();
    auto in = inner.values();
    for (std::size_t k = 0; k < pv.size(); ++k)
      in[k] = views_ * (std::log(std::max(pv[k], kProbFloor)) + 1.0) - lq[k];
    std::vector<double> g(w.size());
    for (std::size_t v = 0; v < w.size(); ++v) {
      double s = 0.0;
      auto pvv = p_views_[v].values();
      for (std::size_t k = 0; k < in.size(); ++k) s += pvv[k] * in[k];
      g[v] = s + 2.0 * lambda_ * w[v];
    }
    return g;
  }

 private:
  std::span<const Matrix> p_views_;
  double lambda_;
  double views_;
  Matrix sum_log_q_;
};

struct ApgResult {
  ViewWeights weights;
  double objective = 0.0;
  std::vector<double> trace;  // objective of the accepted iterate, per iteration
  std::size_t iterations = 0;
  bool converged = false;     // false: max_iter hit, best-so-far returned
};

/// Monotone accelerated proximal gradient (FISTA with backtracking) on the
/// weight subproblem; the proximal step is simplex_project. The accepted
/// iterate only moves when the objective does not increase. Momentum is reset
/// whenever the extrapolated point leaves the simplex interior, where the
/// fused target could turn negative.
inline ApgResult solve_w_apg(std::span<const Matrix> p_views, std::span<const Matrix> q_views,
                             double lambda, const ApgConfig& cfg = {},
                             std::span<const double> start = {}) {
  cfg.validate();
  const WeightObjective f(p_views, q_views, lambda);
  const std::size_t views = f.views();
  std::vector<double> x = start.empty()
                              ? std::vector<double>(views, 1.0 / static_cast<double>(views))
                              : simplex_project(start);
  require(x.size() == views, Errc::shape_mismatch, "solve_w_apg: start has wrong length");

  ApgResult r;
  double fx = f.value(x);
  r.trace.push_back(fx);
  std::vector<double> y = x, x_prev = x, z(views), step(views);
  double t = 1.0;
  double lip = 1.0 / cfg.step_init;

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    r.iterations = it;
    const auto gy = f.gradient(y);
    const double fy = f.value(y);
    double fz = 0.0;
    for (int bt = 0; bt < 200; ++bt) {
      for (std::size_t v = 0; v < views; ++v) step[v] = y[v] - gy[v] / lip;
      z = simplex_project(step);
      fz = f.value(z);
      double lin = 0.0, quad = 0.0;
      for (std::size_t v = 0; v < views; ++v) {
        lin += gy[v] * (z[v] - y[v]);
        quad += (z[v] - y[v]) * (z[v] - y[v]);
      }
      if (fz <= fy + lin + 0.5 * lip * quad + 1e-12 * std::abs(fy)) break;
      lip /= cfg.backtrack_factor;
    }

    x_prev = x;
    const double f_prev = fx;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    bool inside = true;
    for (std::size_t v = 0; v < views; ++v) {
      y[v] = x[v] + (t / t_next) * (z[v] - x[v]) + ((t - 1.0) / t_next) * (x[v] - x_prev[v]);
      inside = inside && y[v] >= kWeightFloor;
    }
    t = t_next;
    if (!inside) {
      y = x;
      t = 1.0;
    }
    r.trace.push_back(fx);

    double moved = 0.0;
    for (std::size_t v = 0; v < views; ++v) moved = std::max(moved, std::abs(x[v] - x_prev[v]));
    if (std::abs(f_prev - fx) <= cfg.rel_tol * std::max(1.0, std::abs(fx)) && moved <= 1e-7 &&
        fz <= f_prev) {
      r.converged = true;
      break;
    }
  }
  r.weights = {x, lambda};
  r.objective = fx;
  return r;
}

struct DmjcTModel {
  std::vector<MlpParams> encoders;
  std::vector<Matrix> centroids;  // per view [K x D_v]
  std::vector<double> w;          // view weights on the simplex

  /// Uniform weights 1/V.
  static DmjcTModel initial(std::vector<MlpParams> encoders, std::vector<Matrix> centroids) {
    const std::size_t views = encoders.size();
    return {std::move(encoders), std::move(centroids),
            std::vector<double>(views, 1.0 / static_cast<double>(views))};
  }

  std::size_t views() const noexcept { return encoders.size(); }
};

struct DmjcTOptions {
  double lambda = 2.0e4;
  ApgConfig apg;
};

struct WeightStep {
  double before = 0.0;  // subproblem objective at the old w
  double after = 0.0;   // at the new w, same frozen P^(v), Q^(v)
  bool converged = false;
};

struct DmjcTResult {
  DmjcTModel model;
  TrainHistory history;
  std::vector<WeightStep> weight_steps;
  Matrix p;  // final fused target
  std::vector<std::size_t> labels;
  double final_loss = 0.0;
};

/// Network gradients of one view's term with the fused target frozen. The
/// term is a plain KL between the fused P and that view's Q, so this is the
/// single-view Student's t gradient.
inline AssignmentGradients dmjc_t_network_gradients(const Matrix& z, const Matrix& centroids,
                                                    const Matrix& q, const Matrix& p,
                                                    double alpha) {
  return kl_assignment_gradients(z, centroids, q, p, alpha);
}

namespace detail {

struct PerViewAssignments {
  std::vector<Matrix> q;
  std::vector<Matrix> p;
};

inline PerViewAssignments per_view_assignments(const std::vector<MlpParams>& encoders,
                                               const std::vector<Matrix>& centroids,
                                               std::span<const Matrix> data, const DecHyper& h) {
  PerViewAssignments a;
  const auto z = encode_views(encoders, data);
  for (std::size_t v = 0; v < z.size(); ++v) {
    a.q.push_back(soft_assignment(z[v], centroids[v], h.alpha));
    a.p.push_back(target_distribution(a.q.back(), h.gamma));
  }
  return a;
}

}  // namespace detail

/// Predicted cluster per sample: argmax of the fused target.
inline std::vector<std::size_t> predict_t(const DmjcTModel& model, std::span<const Matrix> data,
                                          const DecHyper& h) {
  const auto a = detail::per_view_assignments(model.encoders, model.centroids, data, h);
  return row_argmax(fused_target(a.p, model.w));
}

/// Alternating optimization. Each epoch: refresh per-view Q and P and the
/// fused target; sweep minibatches over encoders and centroids with the
/// fused target frozen; then re-solve the view weights by APG with the
/// networks frozen, warm-started from the current weights.
inline DmjcTResult dmjc_t_train(DmjcTModel model, std::span<const Matrix> data,
                                const JointOptions& opt, const DmjcTOptions& topt, Rng& rng) {
  const std::size_t n = detail::common_rows(data);
  require(n > 0, Errc::invalid_argument, "dmjc_t_train: empty data");
  opt.validate(n);
  topt.apg.validate();
  const std::size_t views = model.views();
  require(model.centroids.size() == views && model.w.size() == views, Errc::shape_mismatch,
          "dmjc_t_train: encoders, centroids and weights disagree on view count");
  const auto& h = opt.hyper;

  Optimizer optim(opt.optimizer);
  std::vector<Matrix*> params;
  for (std::size_t v = 0; v < views; ++v) {
    for (auto* p : model.encoders[v].encoder_parameters()) params.push_back(p);
    params.push_back(&model.centroids[v]);
  }

  DmjcTResult out;
  Matrix p;
  std::vector<std::size_t> last_labels;
  auto snap = detail::per_view_assignments(model.encoders, model.centroids, data, h);

  for (std::size_t epoch = 0; epoch < h.max_epochs; ++epoch) {
    const Matrix fused_now = fused_target(snap.p, model.w);
    const auto labels = row_argmax(fused_now);
    double change = 1.0;
    if (epoch % h.update_interval == 0) {
      p = fused_now;
      if (!last_labels.empty()) {
        change = detail::label_change_fraction(labels, last_labels);
        if (change < h.label_change_tol) {
          out.history.converged = true;
          break;
        }
      }
      last_labels = labels;
    }
    const double loss = fused_objective(p, snap.q, model.w, topt.lambda);
    detail::check_finite_loss(loss, epoch, "dmjc_t_train");

    EpochRecord rec{epoch, loss, change, model.w, {}, std::nullopt};
    if (!opt.truth.empty()) {
      for (std::size_t v = 0; v < views; ++v)
        rec.view_acc.push_back(detail::accuracy_of(row_argmax(snap.q[v]), opt.truth));
      rec.fused_acc = detail::accuracy_of(labels, opt.truth);
    }
    out.history.epochs.push_back(std::move(rec));
    if (opt.observer) {
      EpochSnapshot s{epoch, snap.q, snap.p, Matrix::row_vector(model.w)};
      s.p.push_back(p);
      opt.observer(s);
    }

    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const auto idx = detail::batch_slice(order, start, opt.batch_size);
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      const Matrix pb = select_rows(p, idx);
      std::vector<Matrix> grads;
      for (std::size_t v = 0; v < views; ++v) {
        const EncoderPass pass(model.encoders[v], select_rows(data[v], idx));
        const Matrix qb = soft_assignment(pass.embedding(), model.centroids[v], h.alpha);
        auto g = dmjc_t_network_gradients(pass.embedding(), model.centroids[v], qb, pb, h.alpha);
        g.d_z *= inv_b;
        g.d_mu *= inv_b;
        for (auto& gp : pass.backward(g.d_z)) grads.push_back(std::move(gp));
        grads.push_back(std::move(g.d_mu));
      }
      detail::diverge_on_non_finite([&] { optim.step(params, grads); }, "dmjc_t_train");
    }

    snap = detail::per_view_assignments(model.encoders, model.centroids, data, h);
    WeightStep ws;
    ws.before = objective_t(snap.p, snap.q, model.w, topt.lambda);
    auto apg = solve_w_apg(snap.p, snap.q, topt.lambda, topt.apg, model.w);
    ws.after = apg.objective;
    ws.converged = apg.converged;
    require(apg.weights.valid(), Errc::non_finite, "dmjc_t_train: weight step left the simplex");
    model.w = std::move(apg.weights.w);
    out.weight_steps.push_back(ws);
  }

  out.p = fused_target(snap.p, model.w);
  out.labels = row_argmax(out.p);
  out.final_loss = fused_objective(p.empty() ? out.p : p, snap.q, model.w, topt.lambda);
  out.model = std::move(model);
  return out;
}

}  // namespace dmjc
