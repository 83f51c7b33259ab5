#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"

namespace dmjc {

enum class OptimizerKind { sgd_momentum, adam, adagrad };

inline std::string_view to_string(OptimizerKind k) noexcept {
  switch (k) {
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adagrad: return "adagrad";
  }
  return "?";
}

inline OptimizerKind optimizer_kind_from_string(std::string_view s) {
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adagrad") return OptimizerKind::adagrad;
  fail(Errc::config, "unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adagrad;
  double lr = 1e-2;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Library defaults: Adam lr 1e-3, Adagrad lr 1e-2, SGD lr 1e-2 with momentum 0.9.
  static OptimizerConfig defaults(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    c.lr = kind == OptimizerKind::adam ? 1e-3 : 1e-2;
    return c;
  }

  bool operator==(const OptimizerConfig&) const = default;
};

/// First-order optimizer with per-parameter accumulators.
///
/// Accumulators are allocated on the first step() and bound to that
/// parameter list's shapes from then on. Copying an Optimizer copies its full
/// state, so step() on two copies with identical inputs yields identical
/// results.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const noexcept { return config_; }
  OptimizerKind kind() const noexcept { return config_.kind; }
  std::size_t step_count() const noexcept { return steps_; }

  /// Applies one update. `names`, when given, labels parameters in errors.
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads,
            std::span<const std::string> names = {}) {
    require(params.size() == grads.size(), Errc::shape_mismatch,
            "optimizer: " + std::to_string(params.size()) + " params but " +
                std::to_string(grads.size()) + " grads");
    auto label = [&](std::size_t k) {
      return k < names.size() ? names[k] : "param#" + std::to_string(k);
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
      require(params[k]->same_shape(grads[k]), Errc::shape_mismatch,
              "optimizer: gradient shape " + grads[k].shape_str() + " does not match " +
                  label(k) + " " + params[k]->shape_str());
      require(all_finite(grads[k]), Errc::non_finite,
              "optimizer: non-finite gradient for " + label(k));
    }
    if (first_.empty()) {
      for (const auto& g : grads) {
        first_.emplace_back(g.rows(), g.cols());
        if (config_.kind == OptimizerKind::adam) second_.emplace_back(g.rows(), g.cols());
      }
    }
    require(first_.size() == params.size(), Errc::shape_mismatch,
            "optimizer: parameter list changed size between steps");
    for (std::size_t k = 0; k < params.size(); ++k)
      require(first_[k].same_shape(grads[k]), Errc::shape_mismatch,
              "optimizer: " + label(k) + " changed shape between steps");

    ++steps_;
    for (std::size_t k = 0; k < params.size(); ++k) update(*params[k], grads[k], k);
  }

 private:
  void update(Matrix& p, const Matrix& g, std::size_t k) {
    auto pv = p.values();
    auto gv = g.values();
    auto m = first_[k].values();
    const double lr = config_.lr;
    switch (config_.kind) {
      case OptimizerKind::sgd_momentum:
        for (std::size_t i = 0; i < pv.size(); ++i) {
          m[i] = config_.momentum * m[i] + gv[i];
          pv[i] -= lr * m[i];
        }
        break;
      case OptimizerKind::adagrad:
        for (std::size_t i = 0; i < pv.size(); ++i) {
          m[i] += gv[i] * gv[i];
          if (gv[i] != 0.0) pv[i] -= lr * gv[i] / (std::sqrt(m[i]) + config_.eps);
        }
        break;
      case OptimizerKind::adam: {
        auto v = second_[k].values();
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        for (std::size_t i = 0; i < pv.size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * gv[i];
          v[i] = b2 * v[i] + (1.0 - b2) * gv[i] * gv[i];
          const double mhat = m[i] / c1;
          const double vhat = v[i] / c2;
          if (mhat != 0.0) pv[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        break;
      }
    }
  }

  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<Matrix> first_;   // momentum / Adam m / Adagrad sum of g^2
  std::vector<Matrix> second_;  // Adam v
};

}  // namespace dmjc
