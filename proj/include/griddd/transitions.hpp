#pragma once

// Base and augmented transition matrices. Base matrices act on the a proper
// categories; augmented ones on a+2 categories with DEL at index a and DEL* at
// a+1, so the proper block is shared between the two.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "griddd/error.hpp"
#include "griddd/schedules.hpp"

namespace griddd {

/// Row-stochastic matrix, [i][j] = p(x^t = j | x^{t-1} = i).
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::RowVectorXd row(int i) const { return m_.row(i); }

  double max_row_sum_error() const {
    double worst = 0.0;
    for (int i = 0; i < dim(); ++i) worst = std::max(worst, std::abs(m_.row(i).sum() - 1.0));
    return worst;
  }
  bool entries_in_unit_interval() const {
    return (m_.array() >= 0.0).all() && (m_.array() <= 1.0 + 1e-15).all();
  }

  TransitionMatrix operator*(const TransitionMatrix& o) const { return TransitionMatrix(m_ * o.m_); }

 private:
  Eigen::MatrixXd m_;
};

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void check_marginal(const Eigen::VectorXd& m) {
  if (m.size() < 1) throw Error("marginal is empty");
  if ((m.array() < 0.0).any()) throw Error("marginal has negative entries");
  if (std::abs(m.sum() - 1.0) > 1e-9) throw Error("marginal is not normalized");
}

/// alpha*I + (1 - alpha)*1 m^T over proper categories.
inline TransitionMatrix build_base_Q(double alpha_t, const Eigen::VectorXd& marginal) {
  if (!(alpha_t >= 0.0 && alpha_t <= 1.0)) throw Error("alpha must lie in [0, 1]");
  check_marginal(marginal);
  const auto d = marginal.size();
  Eigen::MatrixXd q = alpha_t * Eigen::MatrixXd::Identity(d, d) +
                      (1.0 - alpha_t) * Eigen::VectorXd::Ones(d) * marginal.transpose();
  return TransitionMatrix(std::move(q));
}

inline TransitionMatrix build_base_Qbar(int s, int t, const ScheduleSet& sched, Channel c,
                                        const Eigen::VectorXd& marginal) {
  return build_base_Q(sched.alpha_bar_ratio(c, s, t), marginal);
}

struct AugmentedBlocks {
  TransitionMatrix A, B, C, D;
};

/// A*, B*, C*, D* on the a+2 augmented space.
inline AugmentedBlocks build_augmented_blocks(const Eigen::VectorXd& marginal) {
  check_marginal(marginal);
  const int a = static_cast<int>(marginal.size());
  const int del = a, del_star = a + 1, d = a + 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d), B = A, C = A, D = A;
  A.topLeftCorner(a, a).setIdentity();
  B.topLeftCorner(a, a) = Eigen::VectorXd::Ones(a) * marginal.transpose();
  C.block(0, del_star, a, 1).setOnes();
  D.col(del).setOnes();
  for (Eigen::MatrixXd* m : {&A, &B, &C}) {
    (*m)(del, del) = 1.0;
    (*m)(del_star, del) = 1.0;
  }
  return {TransitionMatrix(A), TransitionMatrix(B), TransitionMatrix(C), TransitionMatrix(D)};
}

/// Q*^t = zeta(t)(alpha^t A* + (1 - alpha^t) B*) + (1 - zeta(t)) C*.
inline TransitionMatrix build_Qstar(int t, const ScheduleSet& sched, Channel c,
                                    const Eigen::VectorXd& marginal) {
  if (t < 1 || t > sched.T()) throw Error("Q* needs 1 <= t <= T");
  const auto blk = build_augmented_blocks(marginal);
  const double z = sched.zeta(t), al = sched.alpha(c, t);
  return TransitionMatrix(z * (al * blk.A.matrix() + (1.0 - al) * blk.B.matrix()) +
                          (1.0 - z) * blk.C.matrix());
}

/// Closed-form cumulative Q-bar*^{t|s}; identity at s = t.
inline TransitionMatrix build_Qbar_star(int s, int t, const ScheduleSet& sched, Channel c,
                                        const Eigen::VectorXd& marginal) {
  if (s < 0 || s > t || t > sched.T()) throw Error("Q-bar* needs 0 <= s <= t <= T");
  const int d = static_cast<int>(marginal.size()) + 2;
  if (s == t) {
    check_marginal(marginal);
    return TransitionMatrix(Eigen::MatrixXd::Identity(d, d));
  }
  const auto blk = build_augmented_blocks(marginal);
  const double zb = sched.zeta_bar(s, t);
  const double zb_prev = sched.zeta_bar(s, t - 1);
  const double ab = sched.alpha_bar_ratio(c, s, t);
  return TransitionMatrix(zb * (ab * blk.A.matrix() + (1.0 - ab) * blk.B.matrix()) +
                          zb_prev * (1.0 - sched.zeta(t)) * blk.C.matrix() +
                          (1.0 - zb_prev) * blk.D.matrix());
}

/// Row x of the base cumulative kernel alpha_bar I + (1 - alpha_bar) 1 m^T.
inline Eigen::RowVectorXd base_kernel_row(double alpha_bar, const Eigen::VectorXd& marginal, int x) {
  Eigen::RowVectorXd r = (1.0 - alpha_bar) * marginal.transpose();
  r(x) += alpha_bar;
  return r;
}

}  // namespace griddd
