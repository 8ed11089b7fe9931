#ifndef COALA_ESTIMATORS_REINFORCE_HPP_
#define COALA_ESTIMATORS_REINFORCE_HPP_

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "coala/estimators/returns.hpp"
#include "coala/util/errors.hpp"

namespace coala::estimators {

namespace detail {

// Per-(b, l) weights on grad log pi under the given estimator mode, split
// into the current-inner-episode part and the future-episodes part.
struct ReturnWeights {
  std::vector<double> current;  // [b][l]
  std::vector<double> future;   // [b][l]
};

inline ReturnWeights return_weights(const MetaTrajectoryBatch& batch,
                                    EstimatorMode mode) {
  batch.validate();
  const int b_count = batch.batch_size;
  const int seq_len = batch.length();
  const int t_len = batch.inner_episode_length;

  // tail[b][l]: own-trajectory rewards from l to the end of its episode.
  std::vector<double> tail(batch.rewards.size(), 0.0);
  for (int b = 0; b < b_count; ++b)
    for (int t = seq_len - 1; t >= 0; --t) {
      const std::size_t i = batch.idx(b, t);
      const bool episode_end = (t % t_len) == t_len - 1;
      tail[i] = batch.rewards[i] +
                (episode_end ? 0.0 : tail[batch.idx(b, t + 1)]);
    }
  // own_future[b][l]: own-trajectory rewards strictly after l's episode.
  // batch_future[m]: all-trajectory rewards in episodes after m.
  const int m_count = batch.num_inner_episodes;
  std::vector<double> episode_sum_own(
      static_cast<std::size_t>(b_count) * m_count, 0.0);
  for (int b = 0; b < b_count; ++b)
    for (int t = 0; t < seq_len; ++t)
      episode_sum_own[static_cast<std::size_t>(b) * m_count +
                      batch.inner_episode(t)] += batch.rewards[batch.idx(b, t)];

  ReturnWeights w;
  w.current.assign(batch.rewards.size(), 0.0);
  w.future.assign(batch.rewards.size(), 0.0);
  for (int b = 0; b < b_count; ++b) {
    for (int t = 0; t < seq_len; ++t) {
      const std::size_t i = batch.idx(b, t);
      const int m = batch.inner_episode(t);
      double own_future = 0.0;
      double all_future = 0.0;
      for (int mm = m + 1; mm < m_count; ++mm) {
        own_future += episode_sum_own[static_cast<std::size_t>(b) * m_count + mm];
        for (int bb = 0; bb < b_count; ++bb)
          all_future +=
              episode_sum_own[static_cast<std::size_t>(bb) * m_count + mm];
      }
      switch (mode) {
        case EstimatorMode::coala:
          w.current[i] = tail[i] / b_count;
          w.future[i] = all_future / b_count;
          break;
        case EstimatorMode::mfos:
          w.current[i] = tail[i];
          w.future[i] = all_future / b_count;
          break;
        case EstimatorMode::batch_unaware:
          // The 1/B in front of the whole estimator is folded in here.
          w.current[i] = tail[i] / b_count;
          w.future[i] = own_future / b_count;
          break;
      }
    }
  }
  return w;
}

}  // namespace detail

// Raw-return REINFORCE estimate of the policy gradient under the given
// mode. log_prob_grads holds the per-(b, l) gradient of log pi(a | h),
// flattened [b][l][param]; no baselines or discounting are applied, so
// this is the literal estimator used by the enumeration oracles.
inline std::vector<double> reinforce_gradient(
    const MetaTrajectoryBatch& batch, std::span<const double> log_prob_grads,
    int param_dim, EstimatorMode mode) {
  const std::size_t n = batch.rewards.size();
  if (log_prob_grads.size() != n * static_cast<std::size_t>(param_dim))
    throw UsageError("reinforce_gradient: grad shape mismatch");
  detail::ReturnWeights w = detail::return_weights(batch, mode);
  std::vector<double> grad(param_dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = w.current[i] + w.future[i];
    for (int p = 0; p < param_dim; ++p)
      grad[p] += weight * log_prob_grads[i * param_dim + p];
  }
  return grad;
}

// L2-norm ratio of the future-episode gradient contribution to the
// current-episode contribution under the given mode. A zero denominator
// reports +infinity.
struct BalanceTerms {
  std::vector<double> future;
  std::vector<double> current;
};

inline BalanceTerms gradient_balance_terms(
    const MetaTrajectoryBatch& batch, std::span<const double> log_prob_grads,
    int param_dim, EstimatorMode mode) {
  const std::size_t n = batch.rewards.size();
  if (log_prob_grads.size() != n * static_cast<std::size_t>(param_dim))
    throw UsageError("gradient_balance: grad shape mismatch");
  detail::ReturnWeights w = detail::return_weights(batch, mode);
  BalanceTerms terms;
  terms.future.assign(param_dim, 0.0);
  terms.current.assign(param_dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int p = 0; p < param_dim; ++p) {
      terms.future[p] += w.future[i] * log_prob_grads[i * param_dim + p];
      terms.current[p] += w.current[i] * log_prob_grads[i * param_dim + p];
    }
  return terms;
}

inline double balance_ratio(std::span<const double> future,
                            std::span<const double> current) {
  double fut_sq = 0.0, cur_sq = 0.0;
  for (double v : future) fut_sq += v * v;
  for (double v : current) cur_sq += v * v;
  if (cur_sq == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(fut_sq) / std::sqrt(cur_sq);
}

inline double gradient_balance(const MetaTrajectoryBatch& batch,
                               std::span<const double> log_prob_grads,
                               int param_dim, EstimatorMode mode) {
  BalanceTerms terms =
      gradient_balance_terms(batch, log_prob_grads, param_dim, mode);
  return balance_ratio(terms.future, terms.current);
}

}  // namespace coala::estimators

#endif  // COALA_ESTIMATORS_REINFORCE_HPP_
