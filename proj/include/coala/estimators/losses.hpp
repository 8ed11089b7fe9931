#ifndef COALA_ESTIMATORS_LOSSES_HPP_
#define COALA_ESTIMATORS_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <span>

#include "coala/util/errors.hpp"

namespace coala::estimators {

struct LossCoefficients {
  double value_coefficient = 0.5;
  double entropy_coefficient = 0.0;
  double ppo_clipping_epsilon = 0.2;
  bool clip_value = true;
};

// Reference loss formulas on plain arrays. The tape-based training path
// mirrors these element-wise expressions in its fused loss node; tests pin
// the two against each other.

// -min(r*A, clip(r, 1-eps, 1+eps)*A) with r = exp(logp_new - logp_old).
inline double ppo_policy_term_elem(double logp_new, double logp_old,
                                   double advantage, double eps) {
  const double ratio = std::exp(logp_new - logp_old);
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return -std::min(ratio * advantage, clipped * advantage);
}

inline double a2c_policy_term_elem(double logp, double advantage) {
  return -logp * advantage;
}

// Squared error to the target; when clipping, the value prediction may not
// move further than eps from its rollout-time value without penalty.
inline double value_loss_elem(double value, double value_old, double target,
                              double eps, bool clip) {
  const double plain = (value - target) * (value - target);
  if (!clip) return plain;
  const double clipped_v =
      value_old + std::clamp(value - value_old, -eps, eps);
  const double clipped = (clipped_v - target) * (clipped_v - target);
  return std::max(plain, clipped);
}

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// Mean PPO loss over a flat element span. Spans must have equal lengths;
// entropies may be empty when the coefficient is zero.
inline LossStats ppo_loss(std::span<const double> logp_new,
                          std::span<const double> logp_old,
                          std::span<const double> advantages,
                          std::span<const double> values,
                          std::span<const double> values_old,
                          std::span<const double> value_targets,
                          std::span<const double> entropies,
                          const LossCoefficients& coefs) {
  const std::size_t n = logp_new.size();
  if (logp_old.size() != n || advantages.size() != n || values.size() != n ||
      values_old.size() != n || value_targets.size() != n)
    throw UsageError("ppo_loss: shape mismatch");
  LossStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    stats.policy += ppo_policy_term_elem(logp_new[i], logp_old[i],
                                         advantages[i],
                                         coefs.ppo_clipping_epsilon);
    stats.value += value_loss_elem(values[i], values_old[i], value_targets[i],
                                   coefs.ppo_clipping_epsilon,
                                   coefs.clip_value);
    if (!entropies.empty()) stats.entropy += entropies[i];
  }
  stats.policy /= static_cast<double>(n);
  stats.value = coefs.value_coefficient * stats.value / static_cast<double>(n);
  stats.entropy /= static_cast<double>(n);
  stats.total =
      stats.policy + stats.value - coefs.entropy_coefficient * stats.entropy;
  return stats;
}

inline LossStats a2c_loss(std::span<const double> logp,
                          std::span<const double> advantages,
                          std::span<const double> values,
                          std::span<const double> value_targets,
                          std::span<const double> entropies,
                          const LossCoefficients& coefs) {
  const std::size_t n = logp.size();
  if (advantages.size() != n || values.size() != n ||
      value_targets.size() != n)
    throw UsageError("a2c_loss: shape mismatch");
  LossStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    stats.policy += a2c_policy_term_elem(logp[i], advantages[i]);
    stats.value += value_loss_elem(values[i], values[i], value_targets[i],
                                   0.0, /*clip=*/false);
    if (!entropies.empty()) stats.entropy += entropies[i];
  }
  stats.policy /= static_cast<double>(n);
  stats.value = coefs.value_coefficient * stats.value / static_cast<double>(n);
  stats.entropy /= static_cast<double>(n);
  stats.total =
      stats.policy + stats.value - coefs.entropy_coefficient * stats.entropy;
  return stats;
}

}  // namespace coala::estimators

#endif  // COALA_ESTIMATORS_LOSSES_HPP_
