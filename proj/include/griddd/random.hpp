#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "griddd/error.hpp"

namespace griddd {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Inverse-CDF draw from unnormalized non-negative weights.
inline int sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error("categorical distribution has no mass");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last = -1;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last = static_cast<int>(k);
    if (u < acc) return last;
  }
  return last;
}

inline int sample_categorical(const std::vector<double>& weights, Rng& rng) {
  return sample_categorical(std::span<const double>(weights), rng);
}

inline int sample_categorical(const Eigen::VectorXd& weights, Rng& rng) {
  return sample_categorical(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())), rng);
}

/// Independent stream for item `index` of a run seeded with `seed`.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw Error("malformed generator state");
}

}  // namespace griddd
