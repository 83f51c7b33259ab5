#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "dmjc/metrics.hpp"
#include "dmjc/rng.hpp"

using namespace dmjc;

namespace {

std::vector<Label> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<Label> out(n);
  for (auto& l : out) l = rng.below(k);
  return out;
}

// Accuracy by trying every mapping of predicted ids onto truth ids.
double brute_force_accuracy(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  const std::size_t k =
      1 + std::max(*std::max_element(pred.begin(), pred.end()), *std::max_element(truth.begin(), truth.end()));
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[pred[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace

TEST(Accuracy, IdentityAndRelabeling) {
  const std::vector<Label> truth{0, 0, 1, 1, 2, 2, 2};
  EXPECT_EQ(clustering_accuracy(truth, truth), 1.0);
  const std::vector<Label> relabeled{2, 2, 0, 0, 1, 1, 1};
  EXPECT_EQ(clustering_accuracy(relabeled, truth), 1.0);
}

TEST(Accuracy, CrossCaseIsOneHalf) {
  const std::vector<Label> truth{0, 0, 1, 1}, pred{0, 1, 0, 1};
  EXPECT_NEAR(clustering_accuracy(pred, truth), 0.5, 1e-12);
}

TEST(Accuracy, HandlesDifferentClusterCounts) {
  const std::vector<Label> truth{0, 0, 1, 1, 1, 1}, pred{0, 1, 2, 2, 2, 3};
  EXPECT_NEAR(clustering_accuracy(pred, truth), 4.0 / 6.0, 1e-12);
}

TEST(Hungarian, AgreesWithBruteForceUpToSixClusters) {
  Rng rng(77);
  for (std::size_t k = 1; k <= 6; ++k)
    for (int t = 0; t < 30; ++t) {
      const auto truth = random_labels(40, k, rng);
      const auto pred = random_labels(40, k, rng);
      EXPECT_NEAR(clustering_accuracy(pred, truth), brute_force_accuracy(pred, truth), 1e-12)
          << "k=" << k;
    }
}

TEST(Hungarian, MinimumCostOnSquareMatrix) {
  const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  const auto assignment = hungarian_min_cost(cost, 3);
  double total = 0.0;
  for (std::size_t r = 0; r < 3; ++r) total += cost[r * 3 + assignment[r]];
  EXPECT_EQ(total, 5.0);
}

TEST(Nmi, HandCases) {
  const std::vector<Label> truth{0, 0, 1, 1};
  EXPECT_NEAR(nmi(truth, truth), 1.0, 1e-12);
  EXPECT_EQ(nmi(std::vector<Label>{0, 0, 0, 0}, truth), 0.0);
  EXPECT_NEAR(nmi(std::vector<Label>{0, 1, 0, 1}, truth), 0.0, 1e-12);
}

TEST(Nmi, SymmetricAndBounded) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_labels(30, 4, rng), b = random_labels(30, 3, rng);
    const double x = nmi(a, b);
    EXPECT_NEAR(x, nmi(b, a), 1e-12);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0 + 1e-12);
  }
}

TEST(Ari, HandCases) {
  const std::vector<Label> truth{0, 0, 1, 1};
  EXPECT_NEAR(ari(truth, truth), 1.0, 1e-12);
  EXPECT_NEAR(ari(std::vector<Label>{0, 1, 0, 1}, truth), -0.5, 1e-12);
}

TEST(Ari, RandomPartitionsAverageNearZero) {
  Rng rng(99);
  const auto truth = random_labels(100, 4, rng);
  double sum = 0.0;
  const int trials = 10'000;
  for (int t = 0; t < trials; ++t) sum += ari(random_labels(100, 4, rng), truth);
  EXPECT_NEAR(sum / trials, 0.0, 0.02);
}

TEST(Metrics, RejectLengthMismatch) {
  const std::vector<Label> a{0, 1}, b{0, 1, 1};
  EXPECT_THROW(clustering_accuracy(a, b), Error);
  EXPECT_THROW(nmi(a, b), Error);
  EXPECT_THROW(ari(a, b), Error);
}
