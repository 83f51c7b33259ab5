#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "dmjc/matrix.hpp"
#include "dmjc/rng.hpp"

namespace dmjc::testkit {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.values()) x = scale * rng.normal();
  return m;
}

/// Random row-stochastic matrix with entries bounded away from zero.
inline Matrix random_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (double& x : m.row(i)) s += (x = 0.05 + rng.uniform());
    for (double& x : m.row(i)) x /= s;
  }
  return m;
}

inline constexpr double kFdStep = 1e-5;

/// Relative error with a small absolute floor so coordinates whose true
/// derivative is ~0 do not divide by zero.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Largest relative error between `analytic` and central differences of
/// `loss` with respect to every entry of `param`.
inline double max_fd_error(Matrix& param, const Matrix& analytic, const std::function<double()>& loss,
                           double h = kFdStep) {
  double worst = 0.0;
  for (std::size_t k = 0; k < param.size(); ++k) {
    double& x = param.values()[k];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    worst = std::max(worst, rel_error(analytic.values()[k], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace dmjc::testkit
