#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dmjc/matrix.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/rng.hpp"
#include "test_support.hpp"

using namespace dmjc;

TEST(Matrix, MatmulAgainstHandValues) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  EXPECT_EQ(matmul(a, b), (Matrix{{19, 22}, {43, 50}}));
  EXPECT_EQ(matmul_nt(a, b), matmul(a, transpose(b)));
  EXPECT_EQ(matmul_tn(a, b), matmul(transpose(a), b));
}

TEST(Matrix, ShapeMismatchThrows) {
  const Matrix a(2, 3), b(2, 3);
  EXPECT_THROW(matmul(a, b), Error);
  Matrix c(2, 2);
  EXPECT_THROW(c += a, Error);
}

TEST(Matrix, HconcatAndSelectRows) {
  const Matrix a{{1}, {2}, {3}};
  const Matrix b{{4, 5}, {6, 7}, {8, 9}};
  const std::vector<Matrix> blocks{a, b};
  EXPECT_EQ(hconcat(blocks), (Matrix{{1, 4, 5}, {2, 6, 7}, {3, 8, 9}}));
  const std::vector<std::size_t> rows{2, 0};
  EXPECT_EQ(select_rows(b, rows), (Matrix{{8, 9}, {4, 5}}));
}

TEST(Matrix, ArgmaxPrefersLowestIndexOnTies) {
  const std::vector<double> tie{0.5, 0.5};
  EXPECT_EQ(argmax(tie), 0u);
  const std::vector<double> row{0.1, 0.7, 0.2};
  EXPECT_EQ(argmax(row), 1u);
}

TEST(Rng, SameSeedGivesSamePermutation) {
  Rng a(42), b(42);
  const auto pa = a.permutation(10);
  EXPECT_EQ(pa, b.permutation(10));
  auto sorted = pa;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(10);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
}

TEST(Rng, UniformMeanConverges) {
  Rng rng(7);
  double sum = 0.0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Rng, NormalMomentsAndBelowRange) {
  Rng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(Rng, ShuffleOfSingleElementIsUnchanged) {
  Rng rng(1);
  std::vector<int> one{5};
  rng.shuffle(std::span<int>(one));
  EXPECT_EQ(one, std::vector<int>{5});
}

namespace {

double step_scalar(Optimizer& opt, Matrix& p, double g) {
  Matrix* params[] = {&p};
  const Matrix grads[] = {Matrix{{g}}};
  opt.step(params, grads);
  return p(0, 0);
}

}  // namespace

TEST(Optimizer, ZeroGradientIsFixedPointForEveryKind) {
  for (auto kind : {OptimizerKind::sgd_momentum, OptimizerKind::adam, OptimizerKind::adagrad}) {
    auto cfg = OptimizerConfig::defaults(kind);
    cfg.eps = 0.0;
    Optimizer opt(cfg);
    Matrix p{{1.5, -2.0}};
    Matrix* params[] = {&p};
    const Matrix grads[] = {Matrix(1, 2)};
    opt.step(params, grads);
    EXPECT_EQ(p, (Matrix{{1.5, -2.0}})) << to_string(kind);
    EXPECT_EQ(opt.step_count(), 1u);
  }
}

TEST(Optimizer, AdagradFirstStep) {
  OptimizerConfig cfg{OptimizerKind::adagrad};
  cfg.lr = 1.0;
  cfg.eps = 0.0;
  Optimizer opt(cfg);
  Matrix p{{0.0}};
  EXPECT_DOUBLE_EQ(step_scalar(opt, p, 2.0), -1.0);
}

TEST(Optimizer, SgdMomentumRecurrence) {
  OptimizerConfig cfg{OptimizerKind::sgd_momentum};
  cfg.lr = 0.1;
  cfg.momentum = 0.9;
  Optimizer opt(cfg);
  Matrix p{{0.0}};
  EXPECT_NEAR(step_scalar(opt, p, 1.0), -0.1, 1e-15);
  EXPECT_NEAR(step_scalar(opt, p, 1.0), -0.29, 1e-15);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  // With bias correction the first Adam step is lr * g / (|g| + eps').
  auto cfg = OptimizerConfig::defaults(OptimizerKind::adam);
  cfg.eps = 0.0;
  Optimizer opt(cfg);
  Matrix p{{0.0}};
  EXPECT_NEAR(step_scalar(opt, p, 3.0), -cfg.lr, 1e-15);
}

TEST(Optimizer, CopiesProduceIdenticalUpdates) {
  Rng rng(9);
  Optimizer a(OptimizerConfig::defaults(OptimizerKind::adam));
  Matrix p = testkit::random_matrix(3, 2, rng);
  Matrix* params[] = {&p};
  const Matrix g1[] = {testkit::random_matrix(3, 2, rng)};
  a.step(params, g1);
  Optimizer b = a;
  Matrix pb = p;
  Matrix* params_b[] = {&pb};
  const Matrix g2[] = {testkit::random_matrix(3, 2, rng)};
  a.step(params, g2);
  b.step(params_b, g2);
  EXPECT_EQ(p, pb);
}

TEST(Optimizer, RejectsShapeMismatchAndNamesNonFiniteParameter) {
  Optimizer opt(OptimizerConfig::defaults(OptimizerKind::sgd_momentum));
  Matrix p(2, 2);
  Matrix* params[] = {&p};
  const Matrix wrong[] = {Matrix(2, 3)};
  EXPECT_THROW(opt.step(params, wrong), Error);

  const Matrix bad[] = {Matrix{{0.0, NAN}, {0.0, 0.0}}};
  const std::string names[] = {"encoder.w1"};
  try {
    opt.step(params, bad, names);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite);
    EXPECT_NE(std::string(e.what()).find("encoder.w1"), std::string::npos);
  }
}
