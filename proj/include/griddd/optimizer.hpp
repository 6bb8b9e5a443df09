#pragma once

#include <cmath>
#include <vector>

#include "griddd/autograd.hpp"

namespace griddd::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm clip; <= 0 disables
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& ps, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : ps.all()) {
      m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }

  /// One update from the accumulated gradients; gradients are left untouched.
  void step(ParameterSet& ps) {
    auto& params = ps.all();
    if (params.size() != m_.size()) throw Error("optimizer state does not match parameters");
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& p : params) sq += p.grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat g = params[i].grad * scale;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      params[i].value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return steps_; }
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }
  void set_steps(long s) { steps_ = s; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long steps_ = 0;
};

}  // namespace griddd::nn
