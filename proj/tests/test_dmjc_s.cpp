#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dmjc/dec.hpp"
#include "dmjc/dmjc_s.hpp"
#include "test_support.hpp"

using namespace dmjc;

namespace {

MlpParams small_encoder(std::size_t in, std::size_t out, Rng& rng) {
  return init_mlp(MlpSpec::standard({in, 4, out}), rng, false);
}

}  // namespace

TEST(ImportanceSoftmax, EqualRowIsUniform) {
  const Matrix pi = importance_softmax(Matrix{{0.3, 0.3, 0.3}, {0.0, 0.0, 0.0}});
  for (double v : pi.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(ImportanceSoftmax, HandEvaluatedRow) {
  const Matrix pi = importance_softmax(Matrix{{std::numbers::ln2, 0.0}});
  EXPECT_NEAR(pi(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(pi(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(MultiviewAssignment, SingleViewEqualsStudentT) {
  Rng rng(1);
  for (double alpha : {0.5, 1.0, 3.0}) {
    const std::vector<Matrix> z{testkit::random_matrix(30, 3, rng)};
    const std::vector<Matrix> mu{testkit::random_matrix(4, 3, rng)};
    const Matrix q = multiview_soft_assignment(z, mu, Matrix(4, 1, 1.0), alpha);
    EXPECT_LT(max_abs_diff(q, soft_assignment(z[0], mu[0], alpha)), 1e-12);
  }
}

TEST(MultiviewAssignment, DuplicatedViewsWithUniformWeightsEqualSingleView) {
  Rng rng(2);
  const Matrix z = testkit::random_matrix(25, 2, rng);
  const Matrix mu = testkit::random_matrix(3, 2, rng);
  const std::vector<Matrix> zz{z, z}, mm{mu, mu};
  const Matrix q = multiview_soft_assignment(zz, mm, importance_softmax(Matrix(3, 2)), 1.0);
  EXPECT_LT(max_abs_diff(q, soft_assignment(z, mu, 1.0)), 1e-12);
}

TEST(MultiviewAssignment, HandSizedComplementaryInstance) {
  // View 1: distances {0, 1}; view 2: distances {1, 0}.
  const std::vector<Matrix> z{Matrix{{0.0}}, Matrix{{0.0}}};
  const std::vector<Matrix> mu{Matrix{{0.0}, {1.0}}, Matrix{{1.0}, {0.0}}};
  const Matrix q = multiview_soft_assignment(z, mu, importance_softmax(Matrix(2, 2)), 1.0);
  EXPECT_NEAR(q(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(q(0, 1), 0.5, 1e-15);
}

TEST(DmjcSGradients, MatchFiniteDifferences) {
  Rng rng(23);
  for (double alpha : {0.5, 1.0, 3.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Matrix> z{testkit::random_matrix(5, 2, rng), testkit::random_matrix(5, 3, rng),
                            testkit::random_matrix(5, 2, rng)};
      std::vector<Matrix> mu{testkit::random_matrix(3, 2, rng), testkit::random_matrix(3, 3, rng),
                             testkit::random_matrix(3, 2, rng)};
      Matrix w = testkit::random_matrix(3, 3, rng, 0.5);
      const Matrix p = testkit::random_stochastic(5, 3, rng);
      auto loss = [&] {
        return kl_loss(p, multiview_soft_assignment(z, mu, importance_softmax(w), alpha));
      };
      const auto g = dmjc_s_gradients(z, mu, w, p, alpha);
      EXPECT_NEAR(g.loss, loss(), 1e-12);
      for (std::size_t v = 0; v < 3; ++v) {
        EXPECT_LT(testkit::max_fd_error(z[v], g.d_z[v], loss), 1e-4);
        EXPECT_LT(testkit::max_fd_error(mu[v], g.d_mu[v], loss), 1e-4);
      }
      EXPECT_LT(testkit::max_fd_error(w, g.d_w, loss), 1e-4);
    }
  }
}

TEST(DmjcSGradients, VanishWhenTargetEqualsAssignment) {
  Rng rng(4);
  const std::vector<Matrix> z{testkit::random_matrix(6, 2, rng), testkit::random_matrix(6, 2, rng)};
  const std::vector<Matrix> mu{testkit::random_matrix(3, 2, rng), testkit::random_matrix(3, 2, rng)};
  const Matrix w = testkit::random_matrix(3, 2, rng);
  const Matrix q = multiview_soft_assignment(z, mu, importance_softmax(w), 1.0);
  const auto g = dmjc_s_gradients(z, mu, w, q, 1.0);
  double worst = 0.0;
  for (const auto& m : g.d_z) for (double v : m.values()) worst = std::max(worst, std::abs(v));
  for (const auto& m : g.d_mu) for (double v : m.values()) worst = std::max(worst, std::abs(v));
  for (double v : g.d_w.values()) worst = std::max(worst, std::abs(v));
  EXPECT_LT(worst, 1e-9);
}

TEST(DmjcSGradients, SymmetricViewsGiveZeroWeightGradient) {
  // Identical views with equal weights make dL/dpi equal across views, so the
  // softmax Jacobian cancels for every cluster row.
  Rng rng(6);
  const Matrix z = testkit::random_matrix(7, 2, rng);
  const Matrix mu = testkit::random_matrix(3, 2, rng);
  const std::vector<Matrix> zz{z, z}, mm{mu, mu};
  const auto g = dmjc_s_gradients(zz, mm, Matrix(3, 2), testkit::random_stochastic(7, 3, rng), 1.0);
  for (double v : g.d_w.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(DmjcSTrain, SingleViewFollowsDecTrajectory) {
  Rng data_rng(8);
  const Matrix x = testkit::random_matrix(90, 4, data_rng);
  Rng enc_rng(3);
  const auto enc = small_encoder(4, 2, enc_rng);
  const std::vector<Matrix> emb{encode(enc, x)};
  Rng init_rng(5);
  const auto init = init_view_centroids(emb, 3, init_rng);

  JointOptions opt;
  opt.hyper.max_epochs = 25;
  opt.batch_size = 16;
  Rng a(11), b(11);
  const auto dec = dec_train({enc, init.centroids[0]}, x, opt, a);
  const std::vector<Matrix> views{x};
  const auto s = dmjc_s_train(DmjcSModel::initial({enc}, {init.centroids[0]}), views, opt, b);

  ASSERT_EQ(dec.history.epochs_run(), s.history.epochs_run());
  for (std::size_t e = 0; e < dec.history.epochs_run(); ++e)
    EXPECT_NEAR(dec.history.epochs[e].loss, s.history.epochs[e].loss,
                1e-9 * std::max(1.0, dec.history.epochs[e].loss));
  EXPECT_EQ(dec.labels, s.labels);
  EXPECT_LT(max_abs_diff(dec.q, s.q), 1e-9);
  for (double v : s.model.w.values()) EXPECT_EQ(v, 0.0);
}

TEST(DmjcSTrain, WeightsStayOnSimplexAndRunIsDeterministic) {
  Rng data_rng(10);
  const std::vector<Matrix> views{testkit::random_matrix(60, 3, data_rng),
                                  testkit::random_matrix(60, 2, data_rng)};
  Rng enc_rng(1);
  std::vector<MlpParams> enc{small_encoder(3, 2, enc_rng), small_encoder(2, 2, enc_rng)};
  std::vector<Matrix> emb{encode(enc[0], views[0]), encode(enc[1], views[1])};
  Rng init_rng(2);
  const auto init = init_view_centroids(emb, 3, init_rng);

  JointOptions opt;
  opt.hyper.max_epochs = 10;
  opt.hyper.label_change_tol = 0.0;
  opt.batch_size = 16;
  opt.observer = [](const EpochSnapshot& s) {
    for (std::size_t j = 0; j < s.weights.rows(); ++j) {
      double sum = 0.0;
      for (double v : s.weights.row(j)) {
        EXPECT_GT(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  };
  Rng a(4), b(4);
  const auto r1 = dmjc_s_train(DmjcSModel::initial(enc, init.centroids), views, opt, a);
  const auto r2 = dmjc_s_train(DmjcSModel::initial(enc, init.centroids), views, opt, b);
  EXPECT_EQ(r1.history, r2.history);
  EXPECT_EQ(r1.model.w, r2.model.w);
  EXPECT_EQ(r1.labels, r2.labels);
  EXPECT_EQ(predict_s(r1.model, views, opt.hyper.alpha), r1.labels);
}
