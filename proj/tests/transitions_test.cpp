#include "griddd/transitions.hpp"

#include <gtest/gtest.h>

#include "griddd/random.hpp"

namespace griddd {
namespace {

Eigen::VectorXd random_marginal(int d, Rng& rng) {
  Eigen::VectorXd m(d);
  for (int i = 0; i < d; ++i) m(i) = 0.05 + uniform01(rng);
  return m / m.sum();
}

// Brute-force oracles: explicit products of the single-step kernels.
TransitionMatrix base_product(int s, int t, const ScheduleSet& sch, Channel c, const Eigen::VectorXd& m) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(m.size(), m.size());
  for (int i = s + 1; i <= t; ++i) p = p * build_base_Q(sch.alpha(c, i), m).matrix();
  return TransitionMatrix(p);
}

TransitionMatrix star_product(int s, int t, const ScheduleSet& sch, Channel c, const Eigen::VectorXd& m) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(m.size() + 2, m.size() + 2);
  for (int i = s + 1; i <= t; ++i) p = p * build_Qstar(i, sch, c, m).matrix();
  return TransitionMatrix(p);
}

double max_abs_diff(const TransitionMatrix& a, const TransitionMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

TEST(BaseQ, AnchorsAndHandValue) {
  const Eigen::Vector2d m(0.5, 0.5);
  EXPECT_EQ(build_base_Q(1.0, m).matrix(), Eigen::Matrix2d::Identity());
  const auto q0 = build_base_Q(0.0, m);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(q0.row(i), m.transpose());
  const auto q = build_base_Q(0.3, m);
  EXPECT_NEAR(q(0, 0), 0.65, 1e-15);
  EXPECT_NEAR(q(0, 1), 0.35, 1e-15);
  EXPECT_NEAR(q(1, 0), 0.35, 1e-15);
  EXPECT_NEAR(q(1, 1), 0.65, 1e-15);
  EXPECT_THROW(build_base_Q(0.3, Eigen::Vector2d(0.5, 0.6)), Error);
}

TEST(BaseQbar, IdentityAndTerminal) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const Eigen::Vector3d m(0.2, 0.3, 0.5);
  EXPECT_EQ(build_base_Qbar(9, 9, sch, Channel::nodes, m).matrix(), Eigen::Matrix3d::Identity());
  const auto term = build_base_Qbar(0, 50, sch, Channel::edges, m);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR((term.row(i) - m.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(BaseQbar, ClosedFormMatchesProduct) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  Rng rng(21);
  std::uniform_int_distribution<int> step(0, 50), dim(1, 5);
  for (int k = 0; k < 300; ++k) {
    int s = step(rng), t = step(rng);
    if (s > t) std::swap(s, t);
    const auto m = random_marginal(dim(rng), rng);
    const Channel c = k % 2 ? Channel::nodes : Channel::edges;
    EXPECT_LE(max_abs_diff(build_base_Qbar(s, t, sch, c, m), base_product(s, t, sch, c, m)), 1e-10);
  }
}

TEST(AugmentedBlocks, FigureStructure) {
  const Eigen::Vector3d m(0.2, 0.3, 0.5);
  const auto b = build_augmented_blocks(m);
  const int del = 3, star = 4;
  for (int c = 0; c < 3; ++c) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(5);
    v(c) = 1.0;
    const Eigen::RowVectorXd to_c = v * b.C.matrix();
    EXPECT_EQ(to_c(star), 1.0);
    EXPECT_EQ(to_c.sum(), 1.0);
    EXPECT_EQ((v * b.A.matrix())(c), 1.0);
    EXPECT_NEAR(((v * b.B.matrix()).head(3) - m.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  }
  for (int c = 0; c < 5; ++c) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(5);
    v(c) = 1.0;
    EXPECT_EQ((v * b.D.matrix())(del), 1.0);
  }
  Eigen::RowVectorXd star_v = Eigen::RowVectorXd::Zero(5);
  star_v(star) = 1.0;
  for (const auto* blk : {&b.A, &b.B, &b.C}) EXPECT_EQ((star_v * blk->matrix())(del), 1.0);
  for (const auto* blk : {&b.A, &b.B, &b.C, &b.D}) {
    EXPECT_EQ(blk->max_row_sum_error(), 0.0);
    EXPECT_EQ(blk->matrix()(del, del), 1.0);
  }
}

TEST(Qstar, TerminalStepIsC) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const Eigen::Vector2d m(0.4, 0.6);
  const auto blk = build_augmented_blocks(m);
  EXPECT_EQ(build_Qstar(50, sch, Channel::nodes, m).matrix(), blk.C.matrix());
}

TEST(Qstar, NoDeletionPressureReducesToAugmentedBase) {
  // zeta == 1 everywhere: Q* is the base kernel lifted to the augmented space.
  std::vector<double> ab{1.0, 0.8, 0.5, 0.2, 0.0};
  const auto sch = ScheduleSet::from_tables(ab, ab, {1, 1, 1, 1, 1});
  const Eigen::Vector2d m(0.3, 0.7);
  for (int t = 1; t <= 4; ++t) {
    const auto q = build_Qstar(t, sch, Channel::nodes, m);
    const auto base = build_base_Q(sch.alpha(Channel::nodes, t), m);
    EXPECT_NEAR((q.matrix().topLeftCorner(2, 2) - base.matrix()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_EQ(q.matrix().topRightCorner(2, 2).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Qstar, RowStochasticForAllT) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  Rng rng(4);
  const auto m = random_marginal(4, rng);
  for (int t = 1; t <= 50; ++t)
    for (Channel c : {Channel::nodes, Channel::edges}) {
      const auto q = build_Qstar(t, sch, c, m);
      EXPECT_LE(q.max_row_sum_error(), 1e-12);
      EXPECT_TRUE(q.entries_in_unit_interval());
    }
}

TEST(QbarStar, IdentityAtEqualTimes) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const Eigen::Vector2d m(0.4, 0.6);
  EXPECT_EQ(build_Qbar_star(12, 12, sch, Channel::nodes, m).matrix(), Eigen::MatrixXd::Identity(4, 4));
}

TEST(QbarStar, ClosedFormMatchesProductOnTwoTypes) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  Rng rng(8);
  std::uniform_int_distribution<int> step(0, 50);
  const auto m = random_marginal(2, rng);
  for (int k = 0; k < 300; ++k) {
    int s = step(rng), t = step(rng);
    if (s > t) std::swap(s, t);
    const auto closed = build_Qbar_star(s, t, sch, Channel::nodes, m);
    EXPECT_LE(max_abs_diff(closed, star_product(s, t, sch, Channel::nodes, m)), 1e-9);
    EXPECT_LE(closed.max_row_sum_error(), 1e-10);
  }
}

TEST(QbarStar, AbsorptionAndTransience) {
  const auto sch = build_schedules(50, 0.05, 25, 1.0, 1.5);
  const Eigen::Vector3d m(0.2, 0.3, 0.5);
  const int del = 3, star = 4;
  for (int s = 0; s <= 50; s += 5)
    for (int t = s; t <= 50; ++t) {
      const auto q = build_Qbar_star(s, t, sch, Channel::edges, m);
      // Once deleted, always deleted.
      EXPECT_NEAR(q(del, del), 1.0, 1e-14);
      EXPECT_NEAR(q.row(del).sum(), 1.0, 1e-15);
      // DEL* lasts one step: after any positive horizon it has become DEL.
      if (t > s) {
        EXPECT_EQ(q(star, star), 0.0);
        EXPECT_NEAR(q(star, del), 1.0, 1e-14);
        EXPECT_EQ(q(del, star), 0.0);
      }
    }
}

}  // namespace
}  // namespace griddd
