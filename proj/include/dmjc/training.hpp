#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmjc/assignment.hpp"
#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/metrics.hpp"
#include "dmjc/optimizer.hpp"

namespace dmjc {

/// Everything a trainer computed at the start of one epoch, handed to the
/// optional observer. `q` holds the soft assignments the trainer built
/// (the single-view or multi-view Q, or one per view), `p` the targets
/// (per view, plus the fused target for explicit fusion), `weights` the
/// fusion parameters (pi [K x V], or w [1 x V]; empty for single view).
struct EpochSnapshot {
  std::size_t epoch = 0;
  std::vector<Matrix> q;
  std::vector<Matrix> p;
  Matrix weights;
};

using EpochObserver = std::function<void(const EpochSnapshot&)>;

struct JointOptions {
  DecHyper hyper;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer = OptimizerConfig::defaults(OptimizerKind::adagrad);
  std::vector<Label> truth;  // empty: no accuracy tracking
  EpochObserver observer;

  void validate(std::size_t n) const {
    hyper.validate();
    require(batch_size >= 1, Errc::invalid_argument, "batch_size must be >= 1");
    require(truth.empty() || truth.size() == n, Errc::shape_mismatch,
            "truth labels: expected " + std::to_string(n) + ", got " + std::to_string(truth.size()));
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double label_change = 1.0;         // fraction of hard labels changed since last target update
  std::vector<double> view_weights;  // one per view
  std::vector<double> view_acc;      // empty without truth labels
  std::optional<double> fused_acc;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool converged = false;  // stopped on label_change_tol rather than max_epochs

  std::size_t epochs_run() const noexcept { return epochs.size(); }
  bool operator==(const TrainHistory&) const = default;
};

namespace detail {

inline double label_change_fraction(const std::vector<std::size_t>& a,
                                    const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.empty()) return 1.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

inline void check_finite_loss(double loss, std::size_t epoch, const char* who) {
  require(std::isfinite(loss), Errc::divergence,
          std::string(who) + ": objective became non-finite at epoch " + std::to_string(epoch + 1));
}

/// Runs `fn`, reporting a non-finite gradient as divergence.
template <typename Fn>
void diverge_on_non_finite(Fn&& fn, const char* who) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == Errc::non_finite)
      fail(Errc::divergence, std::string(who) + ": " + e.what());
    throw;
  }
}

inline std::span<const std::size_t> batch_slice(const std::vector<std::size_t>& order,
                                                 std::size_t start, std::size_t batch) {
  const std::size_t stop = std::min(order.size(), start + batch);
  return {order.data() + start, stop - start};
}

inline double accuracy_of(const std::vector<std::size_t>& pred, const std::vector<Label>& truth) {
  return clustering_accuracy(pred, truth);
}

}  // namespace detail

}  // namespace dmjc
