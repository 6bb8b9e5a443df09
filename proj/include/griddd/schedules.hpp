#pragma once

// Time-dependent scalar schedules: cosine alpha_bar per channel, the
// insert/delete timestep distribution zeta' (a truncated logistic density on
// normalized time), its survival function zeta, and the target-size
// distribution h_{n0}.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "griddd/error.hpp"
#include "griddd/random.hpp"

namespace griddd {

enum class Channel { nodes, edges };

struct ScheduleParams {
  int T = 50;
  double w = 0.05;
  double D = 25.0;  // timestep units
  double nu_nodes = 1.0;
  double nu_edges = 1.5;
  double offset = 0.008;
};

class ScheduleSet {
 public:
  ScheduleSet() = default;

  explicit ScheduleSet(const ScheduleParams& p) : params_(p) {
    const int T = p.T;
    if (T < 2) throw ConfigError("schedule needs T >= 2", "T");
    if (!(p.w > 0.0)) throw ConfigError("logistic scale w must be positive", "w");
    if (!(p.D > 0.0 && p.D < T)) throw ConfigError("logistic location D must lie in (0, T)", "D");
    if (!(p.offset >= 0.0)) throw ConfigError("cosine offset must be non-negative", "offset");

    alpha_bar_nodes_ = cosine_table(T, p.nu_nodes, p.offset);
    alpha_bar_edges_ = cosine_table(T, p.nu_edges, p.offset);

    // Logistic density on tau = t/T with location D/T and scale w. The
    // density is already non-negative, so the absolute value is a no-op.
    std::vector<double> raw(static_cast<std::size_t>(T + 1), 0.0);
    const double loc = p.D / T;
    for (int t = 1; t < T; ++t) {
      const double z = (static_cast<double>(t) / T - loc) / p.w;
      const double e = std::exp(-std::abs(z));  // symmetric form avoids overflow
      raw[static_cast<std::size_t>(t)] = e / (p.w * (1.0 + e) * (1.0 + e));
    }
    double total = 0.0;
    for (double r : raw) total += r;

    // Survival as suffix sums: zeta[T] = zeta[T-1] = 0 exactly.
    zeta_.assign(static_cast<std::size_t>(T + 1), 0.0);
    for (int t = T - 1; t >= 1; --t)
      zeta_[static_cast<std::size_t>(t)] =
          zeta_[static_cast<std::size_t>(t + 1)] + raw[static_cast<std::size_t>(t + 1)] / total;
    zeta_[0] = 1.0;
    zeta_prime_.assign(static_cast<std::size_t>(T + 1), 0.0);
    for (int t = 1; t <= T; ++t)
      zeta_prime_[static_cast<std::size_t>(t)] =
          zeta_[static_cast<std::size_t>(t - 1)] - zeta_[static_cast<std::size_t>(t)];
  }

  /// Schedule with explicit tables (indexed 0..T), for oracles and tests.
  /// zeta' is derived from zeta as in the regular constructor.
  static ScheduleSet from_tables(std::vector<double> alpha_bar_nodes, std::vector<double> alpha_bar_edges,
                                 std::vector<double> zeta) {
    const auto n = alpha_bar_nodes.size();
    if (n < 3 || alpha_bar_edges.size() != n || zeta.size() != n) throw Error("schedule tables size mismatch");
    ScheduleSet s;
    s.params_.T = static_cast<int>(n) - 1;
    s.params_.D = 0.5 * s.params_.T;
    s.alpha_bar_nodes_ = std::move(alpha_bar_nodes);
    s.alpha_bar_edges_ = std::move(alpha_bar_edges);
    s.zeta_ = std::move(zeta);
    s.zeta_prime_.assign(n, 0.0);
    for (std::size_t t = 1; t < n; ++t) s.zeta_prime_[t] = s.zeta_[t - 1] - s.zeta_[t];
    return s;
  }

  const ScheduleParams& params() const { return params_; }
  int T() const { return params_.T; }

  double alpha_bar(Channel c, int t) const { return table(c)[check(t)]; }

  /// Single-step alpha^t = alpha_bar(t) / alpha_bar(t-1), for 1 <= t <= T.
  double alpha(Channel c, int t) const {
    if (t < 1 || t > T()) throw Error("alpha needs 1 <= t <= T");
    const auto& a = table(c);
    return a[static_cast<std::size_t>(t)] / a[static_cast<std::size_t>(t - 1)];
  }

  /// alpha_bar^{t|s} = alpha_bar^{t|0} / alpha_bar^{s|0}.
  double alpha_bar_ratio(Channel c, int s, int t) const {
    if (s < 0 || s > t || t > T()) throw Error("alpha_bar_ratio needs 0 <= s <= t <= T");
    if (s == t) return 1.0;
    const auto& a = table(c);
    const double den = a[static_cast<std::size_t>(s)];
    if (den == 0.0) throw Error("division at terminal step");
    const double r = a[static_cast<std::size_t>(t)] / den;
    return std::min(1.0, std::max(0.0, r));
  }

  double zeta(int t) const { return zeta_[check(t)]; }
  double zeta_prime(int t) const { return zeta_prime_[check(t)]; }

  /// zeta_bar^{t|s} = prod_{i=s+1}^{t} zeta(i); 1 for the empty product.
  double zeta_bar(int s, int t) const {
    double p = 1.0;
    for (int i = s + 1; i <= t; ++i) p *= zeta(i);
    return p;
  }

  const std::vector<double>& zeta_table() const { return zeta_; }
  const std::vector<double>& zeta_prime_table() const { return zeta_prime_; }
  const std::vector<double>& alpha_bar_table(Channel c) const { return table(c); }

 private:
  static std::vector<double> cosine_table(int T, double nu, double offset) {
    auto f = [&](int t) {
      const double x = (std::pow(static_cast<double>(t) / T, nu) + offset) / (1.0 + offset);
      const double c = std::cos(0.5 * std::numbers::pi * x);
      return c * c;
    };
    std::vector<double> a(static_cast<std::size_t>(T + 1));
    const double f0 = f(0);
    for (int t = 0; t <= T; ++t) a[static_cast<std::size_t>(t)] = f(t) / f0;
    a[0] = 1.0;
    a[static_cast<std::size_t>(T)] = 0.0;
    return a;
  }

  const std::vector<double>& table(Channel c) const {
    return c == Channel::nodes ? alpha_bar_nodes_ : alpha_bar_edges_;
  }
  std::size_t check(int t) const {
    if (t < 0 || t > T()) throw Error("timestep out of range");
    return static_cast<std::size_t>(t);
  }

  ScheduleParams params_;
  std::vector<double> alpha_bar_nodes_;
  std::vector<double> alpha_bar_edges_;
  std::vector<double> zeta_;
  std::vector<double> zeta_prime_;
};

inline ScheduleSet build_schedules(int T, double w, double D, double nu_nodes, double nu_edges,
                                   double offset = 0.008) {
  return ScheduleSet(ScheduleParams{T, w, D, nu_nodes, nu_edges, offset});
}

struct SizeParams {
  int n_max = 4;
  double p_min = 0.2;
  double p_max = 1.0;
};

/// Normalized h_{n0}(n) over n in [1, n_max], returned indexed by n (entry 0 unused).
inline std::vector<double> target_size_distribution(int n0, const SizeParams& sp) {
  if (sp.n_max < 1 || n0 < 1 || n0 > sp.n_max) throw ConfigError("target size needs 1 <= n0 <= n_max", "n_max");
  if (!(sp.p_min > 0.0 && sp.p_min <= sp.p_max)) throw ConfigError("need 0 < p_min <= p_max", "p_min");
  std::vector<double> h(static_cast<std::size_t>(sp.n_max + 1), 0.0);
  double total = 0.0;
  for (int n = 1; n <= sp.n_max; ++n) {
    const double v = sp.p_max + (sp.p_min - sp.p_max) / sp.n_max * std::abs(n - n0);
    h[static_cast<std::size_t>(n)] = v;
    total += v;
  }
  for (double& v : h) v /= total;
  return h;
}

inline int sample_target_size(int n0, const SizeParams& sp, Rng& rng) {
  return sample_categorical(target_size_distribution(n0, sp), rng);
}

/// k independent draws from zeta'; support is [1, T-1].
inline std::vector<int> sample_edit_timesteps(int k, const ScheduleSet& sched, Rng& rng) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(k, 0)));
  for (int j = 0; j < k; ++j) out.push_back(sample_categorical(sched.zeta_prime_table(), rng));
  return out;
}

}  // namespace griddd
