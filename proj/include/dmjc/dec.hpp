#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dmjc/assignment.hpp"
#include "dmjc/autoencoder.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/rng.hpp"
#include "dmjc/training.hpp"

namespace dmjc {

/// Single-view joint clustering model: one encoder and its centroids.
struct DecModel {
  MlpParams encoder;
  Matrix centroids;  // [K x D_emb]
};

struct DecResult {
  DecModel model;
  TrainHistory history;
  Matrix q;                         // final soft assignment on the full data
  std::vector<std::size_t> labels;  // argmax of q
  double final_loss = 0.0;          // KL(P || q) against the last target
};

/// Self-training on one view: P is refreshed from the full-data Q every
/// update_interval epochs and held fixed in between; each minibatch steps the
/// encoder and the centroids on the mean per-sample KL(P || Q).
///
/// Stops when the fraction of changed hard labels between two target
/// refreshes drops below label_change_tol, or after max_epochs.
inline DecResult dec_train(DecModel model, const Matrix& data, const JointOptions& opt, Rng& rng) {
  const std::size_t n = data.rows();
  require(n > 0, Errc::invalid_argument, "dec_train: empty data");
  opt.validate(n);
  const auto& h = opt.hyper;

  Optimizer optim(opt.optimizer);
  auto params = model.encoder.encoder_parameters();
  params.push_back(&model.centroids);

  DecResult out;
  Matrix p;
  std::vector<std::size_t> last_labels;

  for (std::size_t epoch = 0; epoch < h.max_epochs; ++epoch) {
    const Matrix q = soft_assignment(encode(model.encoder, data), model.centroids, h.alpha);
    auto labels = row_argmax(q);
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
    detail::check_finite_loss(loss, epoch, "dec_train");

    EpochRecord rec{epoch, loss, change, {1.0}, {}, std::nullopt};
    if (!opt.truth.empty()) {
      const double acc = detail::accuracy_of(labels, opt.truth);
      rec.view_acc = {acc};
      rec.fused_acc = acc;
    }
    out.history.epochs.push_back(std::move(rec));
    if (opt.observer) opt.observer(EpochSnapshot{epoch, {q}, {p}, Matrix()});

    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const auto idx = detail::batch_slice(order, start, opt.batch_size);
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      const EncoderPass pass(model.encoder, select_rows(data, idx));
      const Matrix qb = soft_assignment(pass.embedding(), model.centroids, h.alpha);
      auto g = kl_assignment_gradients(pass.embedding(), model.centroids, qb,
                                       select_rows(p, idx), h.alpha);
      g.d_z *= inv_b;
      g.d_mu *= inv_b;
      auto grads = pass.backward(g.d_z);
      grads.push_back(std::move(g.d_mu));
      detail::diverge_on_non_finite([&] { optim.step(params, grads); }, "dec_train");
    }
  }

  out.q = soft_assignment(encode(model.encoder, data), model.centroids, h.alpha);
  out.labels = row_argmax(out.q);
  if (p.empty()) p = target_distribution(out.q, h.gamma);
  out.final_loss = kl_loss(p, out.q);
  out.model = std::move(model);
  return out;
}

/// Hard labels (argmax of the soft assignment) for a trained single-view model.
inline std::vector<std::size_t> predict_dec(const DecModel& model, const Matrix& data,
                                            double alpha) {
  return row_argmax(soft_assignment(encode(model.encoder, data), model.centroids, alpha));
}

}  // namespace dmjc
