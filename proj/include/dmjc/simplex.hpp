#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dmjc/error.hpp"

namespace dmjc {

/// Smallest weight a view may carry after projection.
inline constexpr double kWeightFloor = 1e-8;

/// Euclidean projection onto the probability simplex by sorting
/// (threshold theta from the largest prefix whose shifted values stay
/// positive), followed by flooring at kWeightFloor and renormalizing so every
/// entry is strictly positive.
inline std::vector<double> simplex_project(std::span<const double> v) {
  require(!v.empty(), Errc::invalid_argument, "simplex_project: empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    prefix += u[j];
    const double t = (prefix - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> w(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    w[i] = std::max(v[i] - theta, kWeightFloor);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace dmjc
