#include "griddd/posterior.hpp"

#include <functional>

#include <gtest/gtest.h>

#include "griddd/random.hpp"

namespace griddd {
namespace {

Eigen::VectorXd random_simplex(int d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = 0.01 + uniform01(rng);
  return v / v.sum();
}

// Oracle: distribution of x^{t} given x^s obtained by pushing the start state
// through the single-step kernels one step at a time.
Eigen::RowVectorXd propagate(int x, int s, int t, const ScheduleSet& sch, const Eigen::VectorXd& m) {
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(m.size());
  p(x) = 1.0;
  for (int i = s + 1; i <= t; ++i) p = p * build_base_Q(sch.alpha(Channel::nodes, i), m).matrix();
  return p;
}

// Bayes p(x^{t-1} | x^t, x^s = x) marginalized over p_hat(x).
Eigen::VectorXd bayes_oracle(int x_t, int s, int t, const ScheduleSet& sch, const Eigen::VectorXd& m,
                             const Eigen::VectorXd& p_hat) {
  const int d = static_cast<int>(m.size());
  const Eigen::MatrixXd step = build_base_Q(sch.alpha(Channel::nodes, t), m).matrix();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (int x = 0; x < d; ++x) {
    const Eigen::RowVectorXd prev = propagate(x, s, t - 1, sch, m);
    Eigen::VectorXd joint(d);
    for (int k = 0; k < d; ++k) joint(k) = prev(k) * step(k, x_t);
    if (joint.sum() <= 0.0) continue;
    out += p_hat(x) * joint / joint.sum();
  }
  return out / out.sum();
}

TEST(ReversePosterior, NoiselessStepReturnsPrediction) {
  std::vector<double> ab{1.0, 1.0, 0.5, 0.0};
  const auto sch = ScheduleSet::from_tables(ab, ab, {1.0, 0.5, 0.0, 0.0});
  const PosteriorKernels k(sch, Channel::nodes, Eigen::Vector3d(0.2, 0.3, 0.5));
  const Eigen::VectorXd p = k.posterior({1, 0, 1, Eigen::Vector3d(0, 1, 0)});
  EXPECT_NEAR(p(1), 1.0, 1e-15);
}

TEST(ReversePosterior, UniformPredictionUnderUniformMarginalIsUniform) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const PosteriorKernels k(sch, Channel::nodes, Eigen::Vector3d::Constant(1.0 / 3));
  for (int t = 1; t <= 50; ++t) {
    // Average over the observed category: the symmetric mixture stays uniform.
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(3);
    for (int x = 0; x < 3; ++x) avg += k.posterior({x, 0, t, Eigen::Vector3d::Constant(1.0 / 3)}) / 3.0;
    EXPECT_NEAR((avg.array() - 1.0 / 3).abs().maxCoeff(), 0.0, 1e-12);
  }
  // At the terminal step x^T carries no information: posterior equals the prior push-forward.
  const Eigen::VectorXd p = k.posterior({0, 0, 50, Eigen::Vector3d::Constant(1.0 / 3)});
  EXPECT_NEAR((p.array() - 1.0 / 3).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(ReversePosterior, PathEnumerationOracleAgreesWithPropagation) {
  // Tiny chain: enumerate every path x^s..x^{t-1} literally.
  const auto sch = build_schedules(8, 0.05, 4, 1.0, 1.5);
  const Eigen::Vector3d m(0.25, 0.35, 0.4);
  Rng rng(2);
  for (int s = 0; s < 8; ++s)
    for (int t = s + 1; t <= 8; ++t)
      for (int x_t = 0; x_t < 3; ++x_t) {
        const Eigen::VectorXd p_hat = random_simplex(3, rng);
        Eigen::VectorXd brute = Eigen::VectorXd::Zero(3);
        for (int x = 0; x < 3; ++x) {
          Eigen::VectorXd joint = Eigen::VectorXd::Zero(3);
          std::function<void(int, int, double)> walk = [&](int step, int state, double w) {
            if (step == t - 1) {
              joint(state) += w * build_base_Q(sch.alpha(Channel::nodes, t), m)(state, x_t);
              return;
            }
            const auto q = build_base_Q(sch.alpha(Channel::nodes, step + 1), m);
            for (int nxt = 0; nxt < 3; ++nxt) walk(step + 1, nxt, w * q(state, nxt));
          };
          walk(s, x, 1.0);
          if (joint.sum() > 0) brute += p_hat(x) * joint / joint.sum();
        }
        brute /= brute.sum();
        const PosteriorKernels k(sch, Channel::nodes, m);
        EXPECT_LE((k.posterior({x_t, s, t, p_hat}) - brute).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((bayes_oracle(x_t, s, t, sch, m, p_hat) - brute).cwiseAbs().maxCoeff(), 1e-12);
      }
}

TEST(ReversePosterior, MatchesBayesOracleOnTwoAndThreeCategories) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  Rng rng(17);
  for (int d : {2, 3}) {
    const Eigen::VectorXd m = random_simplex(d, rng);
    const PosteriorKernels k(sch, Channel::nodes, m);
    for (int t = 1; t <= 50; t += 7)
      for (int s = 0; s < t; s += 3)
        for (int x_t = 0; x_t < d; ++x_t) {
          const Eigen::VectorXd p_hat = random_simplex(d, rng);
          const Eigen::VectorXd got = k.posterior({x_t, s, t, p_hat});
          EXPECT_LE((got - bayes_oracle(x_t, s, t, sch, m, p_hat)).cwiseAbs().maxCoeff(), 1e-10);
          EXPECT_NEAR(got.sum(), 1.0, 1e-12);
          EXPECT_GE(got.minCoeff(), 0.0);
        }
  }
}

TEST(ReversePosterior, DelStarBranchMatchesAugmentedKernels) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  Rng rng(5);
  for (int d : {2, 3}) {
    const Eigen::VectorXd m = random_simplex(d, rng);
    const PosteriorKernels k(sch, Channel::nodes, m);
    for (int t = 2; t <= 40; t += 3)
      for (int s = 0; s < t; s += 4) {
        const Eigen::VectorXd p_hat = random_simplex(d, rng);
        const Eigen::VectorXd fast = k.posterior({k.del_star_index(), s, t, p_hat});
        const Eigen::VectorXd literal = k.augmented_posterior({k.del_star_index(), s, t, p_hat});
        EXPECT_LE((fast - literal.head(d)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(literal.tail(2).cwiseAbs().maxCoeff(), 0.0);
        // Proper observations: augmented kernels agree with the base ones.
        const Eigen::VectorXd proper = k.posterior({0, s, t, p_hat});
        EXPECT_LE((proper - k.augmented_posterior({0, s, t, p_hat}).head(d)).cwiseAbs().maxCoeff(), 1e-10);
      }
  }
}

TEST(ReversePosterior, ZeroSupportTermsContributeNothing) {
  // Marginal puts no mass on category 2, and alpha_bar = 0 at t: x^t = 2 is
  // unreachable from any start, so every term vanishes.
  std::vector<double> ab{1.0, 0.0, 0.0};
  const auto sch = ScheduleSet::from_tables(ab, ab, {1.0, 0.0, 0.0});
  const PosteriorKernels k(sch, Channel::nodes, Eigen::Vector3d(0.5, 0.5, 0.0));
  EXPECT_THROW(k.posterior({2, 0, 1, Eigen::Vector3d(0.2, 0.3, 0.5)}), Error);
  // A start category without predicted mass never reaches t-1.
  const Eigen::VectorXd p = k.posterior({0, 0, 1, Eigen::Vector3d(0.4, 0.6, 0.0)});
  EXPECT_EQ(p(2), 0.0);
  EXPECT_NEAR(p(0), 0.4, 1e-15);
}

TEST(ReversePosterior, RejectsBadInputs) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const PosteriorKernels k(sch, Channel::nodes, Eigen::Vector2d(0.5, 0.5));
  EXPECT_THROW(k.posterior({0, 5, 5, Eigen::Vector2d(0.5, 0.5)}), Error);
  EXPECT_THROW(k.posterior({0, 0, 5, Eigen::Vector2d(0.5, 0.6)}), Error);
  EXPECT_THROW(k.posterior({k.del_index(), 0, 5, Eigen::Vector2d(0.5, 0.5)}), Error);
}

TEST(EdgePosterior, UsesLatestEndpointActivation) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const PosteriorKernels k(sch, Channel::edges, Eigen::Vector2d(0.7, 0.3));
  const Eigen::Vector2d p_hat(0.4, 0.6);
  EXPECT_EQ(edge_reverse_posterior(k, 1, 0, 0, 30, p_hat), k.posterior({1, 0, 30, p_hat}));
  EXPECT_EQ(edge_reverse_posterior(k, 1, 0, 17, 30, p_hat), k.posterior({1, 17, 30, p_hat}));
  EXPECT_EQ(edge_reverse_posterior(k, 1, 17, 0, 30, p_hat), k.posterior({1, 17, 30, p_hat}));
}

TEST(EdgePosterior, MatchesBayesOracleOnTwoEdgeTypes) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.0);  // equal nu: node oracle applies
  const Eigen::Vector2d m(0.8, 0.2);
  const PosteriorKernels k(sch, Channel::edges, m);
  Rng rng(9);
  for (int t = 2; t <= 50; t += 6)
    for (int si = 0; si < t; si += 5)
      for (int sj = 0; sj < t; sj += 7) {
        const Eigen::VectorXd p_hat = random_simplex(2, rng);
        const Eigen::VectorXd got = edge_reverse_posterior(k, 0, si, sj, t, p_hat);
        EXPECT_LE((got - bayes_oracle(0, std::max(si, sj), t, sch, m, p_hat)).cwiseAbs().maxCoeff(), 1e-10);
      }
}

TEST(Guidance, Anchors) {
  const Eigen::Vector2d cond(0.9, 0.1), uncond(0.5, 0.5);
  EXPECT_EQ(guided_prediction(cond, uncond, 1.0).p, cond);
  EXPECT_EQ(guided_prediction(cond, uncond, 0.0).p, uncond);
}

TEST(Guidance, ClampAndRenormalize) {
  const auto g = guided_prediction(Eigen::Vector2d(0.9, 0.1), Eigen::Vector2d(0.5, 0.5), 3.0);
  EXPECT_FALSE(g.fell_back);
  EXPECT_NEAR(g.p(0), 1.0, 1e-15);
  EXPECT_EQ(g.p(1), 0.0);
  const auto mild = guided_prediction(Eigen::Vector3d(0.5, 0.3, 0.2), Eigen::Vector3d(0.3, 0.3, 0.4), 2.0);
  EXPECT_NEAR(mild.p.sum(), 1.0, 1e-15);
  EXPECT_NEAR(mild.p(0), 0.7, 1e-15);
}

TEST(Guidance, FallsBackWhenEverythingClamps) {
  // Single category pushed negative by a negative scale.
  const auto g = guided_prediction(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1) * 0.5, -4.0);
  EXPECT_TRUE(g.fell_back);
  EXPECT_EQ(g.p(0), 1.0);
}

}  // namespace
}  // namespace griddd
