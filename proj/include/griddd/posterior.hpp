#pragma once

// Generalized reverse posterior with activation times and classifier-free
// guidance mixing.
//
//   p(x^{t-1}) ∝ sum_x q(x^t | x^{t-1}) q(x^{t-1} | x^s = x) / q(x^t | x^s = x) * p_hat(x)
//
// where s is the (predicted) activation time of the element. Terms whose
// denominator vanishes contribute nothing.

#include <cmath>

#include <Eigen/Dense>

#include "griddd/error.hpp"
#include "griddd/schedules.hpp"
#include "griddd/transitions.hpp"

namespace griddd {

/// The three kernel factors of the posterior for one observed x^t.
struct PosteriorTerms {
  Eigen::VectorXd step_likelihood;   // [k] = q(x^t | x^{t-1} = k)
  Eigen::MatrixXd prev_given_start;  // [x][k] = q(x^{t-1} = k | x^s = x)
  Eigen::VectorXd now_given_start;   // [x] = q(x^t | x^s = x)
};

inline Eigen::VectorXd reverse_posterior(const PosteriorTerms& k, const Eigen::VectorXd& p_hat) {
  if (p_hat.size() != k.prev_given_start.rows() || k.now_given_start.size() != p_hat.size() ||
      k.step_likelihood.size() != k.prev_given_start.cols())
    throw Error("posterior term shapes do not match the prediction");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k.step_likelihood.size());
  for (Eigen::Index x = 0; x < p_hat.size(); ++x) {
    const double den = k.now_given_start(x);
    if (den <= 0.0 || p_hat(x) <= 0.0) continue;
    out += (p_hat(x) / den) * k.prev_given_start.row(x).transpose().cwiseProduct(k.step_likelihood);
  }
  const double total = out.sum();
  if (!(total > 0.0)) throw Error("posterior has empty support");
  return out / total;
}

struct PosteriorInput {
  int x_t = 0;      // observed category at t (proper or DEL*)
  int s_hat = 0;    // activation time, 0 <= s_hat < t
  int t = 1;
  Eigen::VectorXd p_hat;  // prediction over proper categories
};

/// Posterior kernels for one channel. Proper observations use the base
/// kernels; a DEL* observation uses the augmented kernels, whose zeta factors
/// are constant over x^{t-1} and x and cancel after normalization, leaving the
/// base cumulative kernel q(x^{t-1} | x^s).
class PosteriorKernels {
 public:
  PosteriorKernels(const ScheduleSet& sched, Channel channel, Eigen::VectorXd marginal)
      : sched_(&sched), channel_(channel), m_(std::move(marginal)) {
    check_marginal(m_);
  }

  int num_proper() const { return static_cast<int>(m_.size()); }
  int del_index() const { return num_proper(); }
  int del_star_index() const { return num_proper() + 1; }

  PosteriorTerms terms(int x_t, int s_hat, int t) const {
    if (t < 1 || t > sched_->T()) throw Error("posterior needs 1 <= t <= T");
    if (s_hat < 0 || s_hat >= t) throw Error("posterior needs 0 <= s_hat < t");
    const int a = num_proper();
    PosteriorTerms k;
    const double ab_prev = sched_->alpha_bar_ratio(channel_, s_hat, t - 1);
    k.prev_given_start = build_base_Q(ab_prev, m_).matrix();
    if (x_t >= 0 && x_t < a) {
      const double al = sched_->alpha(channel_, t);
      k.step_likelihood = Eigen::VectorXd::Constant(a, (1.0 - al) * m_(x_t));
      k.step_likelihood(x_t) += al;
      const double ab_now = sched_->alpha_bar_ratio(channel_, s_hat, t);
      k.now_given_start = Eigen::VectorXd::Constant(a, (1.0 - ab_now) * m_(x_t));
      k.now_given_start(x_t) += ab_now;
    } else if (x_t == del_star_index()) {
      k.step_likelihood = Eigen::VectorXd::Ones(a);
      k.now_given_start = Eigen::VectorXd::Ones(a);
    } else {
      throw Error("DEL never appears in the reverse process");
    }
    return k;
  }

  /// Distribution over proper categories at t-1.
  Eigen::VectorXd posterior(const PosteriorInput& in) const {
    if (in.p_hat.size() != num_proper()) throw Error("prediction has wrong category count");
    if (std::abs(in.p_hat.sum() - 1.0) > 1e-9) throw Error("prediction is not normalized");
    return reverse_posterior(terms(in.x_t, in.s_hat, in.t), in.p_hat);
  }

  /// Literal evaluation on the augmented space with Q*^t and Q-bar*; output
  /// has a+2 entries. Numerically fragile when zeta_bar underflows; the
  /// sampler uses posterior() and this serves as its reference.
  Eigen::VectorXd augmented_posterior(const PosteriorInput& in) const {
    const int a = num_proper();
    const Eigen::MatrixXd step = build_Qstar(in.t, *sched_, channel_, m_).matrix();
    const Eigen::MatrixXd prev = build_Qbar_star(in.s_hat, in.t - 1, *sched_, channel_, m_).matrix();
    const Eigen::MatrixXd now = build_Qbar_star(in.s_hat, in.t, *sched_, channel_, m_).matrix();
    PosteriorTerms k{step.col(in.x_t), prev, now.col(in.x_t)};
    Eigen::VectorXd p = Eigen::VectorXd::Zero(a + 2);
    p.head(a) = in.p_hat;
    return reverse_posterior(k, p);
  }

  const ScheduleSet& schedule() const { return *sched_; }
  const Eigen::VectorXd& marginal() const { return m_; }

 private:
  const ScheduleSet* sched_;
  Channel channel_;
  Eigen::VectorXd m_;
};

/// Edge posterior: the activation time of e_ij is max(S_i, S_j).
inline Eigen::VectorXd edge_reverse_posterior(const PosteriorKernels& edges, int e_t, int s_i, int s_j, int t,
                                              const Eigen::VectorXd& p_hat) {
  return edges.posterior({e_t, std::max(s_i, s_j), t, p_hat});
}

struct GuidedDistribution {
  Eigen::VectorXd p;
  bool fell_back = false;
};

/// p_uncond + lambda (p_cond - p_uncond), clamped at zero and renormalized.
/// Falls back to p_cond when clamping removes all mass.
inline GuidedDistribution guided_prediction(const Eigen::VectorXd& p_cond, const Eigen::VectorXd& p_uncond,
                                            double lambda) {
  if (p_cond.size() != p_uncond.size()) throw Error("guidance inputs differ in size");
  if (lambda == 1.0) return {p_cond, false};
  if (lambda == 0.0) return {p_uncond, false};
  Eigen::VectorXd p = (p_uncond + lambda * (p_cond - p_uncond)).cwiseMax(0.0);
  const double total = p.sum();
  if (!(total > 0.0)) return {p_cond, true};
  return {p / total, false};
}

}  // namespace griddd
