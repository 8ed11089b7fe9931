#ifndef COALA_ESTIMATORS_RETURNS_HPP_
#define COALA_ESTIMATORS_RETURNS_HPP_

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "coala/util/errors.hpp"

namespace coala::estimators {

enum class OpponentKind { naive, meta };

// Which policy-gradient weighting a trajectory batch is processed with.
// `coala` scales the current inner-episode return by 1/B and averages
// future-episode returns over the batch; `mfos` keeps the current episode
// unscaled; `batch_unaware` treats the B trajectories as independent.
enum class EstimatorMode { coala, batch_unaware, mfos };

inline EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "coala") return EstimatorMode::coala;
  if (s == "batch_unaware") return EstimatorMode::batch_unaware;
  if (s == "mfos") return EstimatorMode::mfos;
  throw ConfigError("unknown estimator mode: " + s);
}

// One batch of B meta-trajectories of M inner episodes of T steps,
// collected for a single meta agent against a single opponent.
// All per-step arrays are row-major [b][l], l in [0, M*T).
struct MetaTrajectoryBatch {
  int batch_size = 0;  // B
  int num_inner_episodes = 0;  // M
  int inner_episode_length = 0;  // T
  int obs_dim = 0;
  OpponentKind opponent_kind = OpponentKind::naive;
  std::vector<float> observations;  // [b][l][obs_dim]
  std::vector<int> actions;
  std::vector<double> rewards;  // unscaled environment rewards
  std::vector<double> behavior_log_probs;
  std::vector<double> values;  // value-head predictions (rescaled space)

  int length() const { return num_inner_episodes * inner_episode_length; }
  int inner_episode(int l) const { return l / inner_episode_length; }
  std::size_t idx(int b, int l) const {
    return static_cast<std::size_t>(b) * length() + l;
  }
  void validate() const {
    const std::size_t n =
        static_cast<std::size_t>(batch_size) * length();
    if (batch_size < 1 || num_inner_episodes < 1 || inner_episode_length < 1)
      throw UsageError("MetaTrajectoryBatch: B, M, T must be positive");
    if (actions.size() != n || rewards.size() != n ||
        behavior_log_probs.size() != n || values.size() != n)
      throw UsageError("MetaTrajectoryBatch: array shape mismatch");
    for (double r : rewards)
      if (!std::isfinite(r)) throw NumericError("MetaTrajectoryBatch: bad reward");
  }
};

struct ReturnsConfig {
  double value_discount = 1.0;  // gamma
  double lambda_td = 1.0;
  double lambda_gae = 1.0;
  int inner_episode_length = 1;  // T
  bool average_future_episodes = false;
  bool normalize_current_episode = false;
  double reward_rescaling = 1.0;
};

// Backward-scan lambda returns over batched meta-trajectories.
//
// r and v are [B][L] row-major with L divisible by T. v holds bootstrap
// values shifted by one step: v[b][t] is the value of the state *after*
// step t (so v[b][L-1] seeds the scan with the terminal bootstrap).
// At inner-episode ends the per-trajectory accumulator is replaced by the
// batch-mean accumulator when average_future_episodes is set; rewards are
// divided by B when normalize_current_episode is set. The batch-mean
// accumulator always uses unnormalized rewards.
inline std::vector<double> batch_lambda_returns(
    std::span<const double> r, double discount, std::span<const double> v,
    double lambda, bool average_future_episodes,
    bool normalize_current_episode, int inner_episode_length, int batch_size) {
  const int b_count = batch_size;
  if (b_count < 1 || r.size() % b_count != 0)
    throw UsageError("batch_lambda_returns: bad batch size");
  const int seq_len = static_cast<int>(r.size()) / b_count;
  if (v.size() != r.size())
    throw UsageError("batch_lambda_returns: r/v shape mismatch");
  if (inner_episode_length < 1 || seq_len % inner_episode_length != 0)
    throw UsageError("batch_lambda_returns: L not divisible by T");

  const double normalization = normalize_current_episode ? b_count : 1;
  std::vector<double> acc(b_count);
  double global_acc = 0.0;
  for (int b = 0; b < b_count; ++b) {
    acc[b] = v[static_cast<std::size_t>(b) * seq_len + seq_len - 1];
    global_acc += acc[b];
  }
  global_acc /= b_count;

  std::vector<double> returns(r.size());
  for (int t = seq_len - 1; t >= 0; --t) {
    const bool episode_end =
        (t % inner_episode_length) == inner_episode_length - 1;
    if (average_future_episodes && episode_end)
      for (int b = 0; b < b_count; ++b) acc[b] = global_acc;
    double next_global = 0.0;
    for (int b = 0; b < b_count; ++b) {
      const std::size_t i = static_cast<std::size_t>(b) * seq_len + t;
      acc[b] = r[i] / normalization +
               discount * ((1.0 - lambda) * v[i] + lambda * acc[b]);
      next_global +=
          r[i] + discount * ((1.0 - lambda) * v[i] + lambda * global_acc);
      returns[i] = acc[b];
    }
    global_acc = next_global / b_count;
  }
  return returns;
}

// TD(lambda_td) targets for the shared batch-unaware value function:
// Algorithm-1 scan with both flags off, regardless of opponent kind.
// Rewards enter rescaled; the terminal bootstrap is zero.
inline std::vector<double> compute_value_targets(const MetaTrajectoryBatch& batch,
                                                 const ReturnsConfig& cfg) {
  batch.validate();
  const int b_count = batch.batch_size;
  const int seq_len = batch.length();
  std::vector<double> r(batch.rewards.size());
  std::vector<double> v_shift(batch.rewards.size());
  for (int b = 0; b < b_count; ++b)
    for (int t = 0; t < seq_len; ++t) {
      const std::size_t i = batch.idx(b, t);
      r[i] = batch.rewards[i] * cfg.reward_rescaling;
      v_shift[i] = t + 1 < seq_len ? batch.values[batch.idx(b, t + 1)] : 0.0;
    }
  return batch_lambda_returns(r, cfg.value_discount, v_shift, cfg.lambda_td,
                              /*average_future_episodes=*/false,
                              /*normalize_current_episode=*/false,
                              batch.inner_episode_length, b_count);
}

struct AdvantageSet {
  std::vector<double> advantages;     // [b][l]
  std::vector<double> value_targets;  // [b][l]
};

// GAE over the batched meta-trajectory: TD errors fed back through the
// lambda-return scan with discount gamma*lambda_gae and lambda = 1.
// The Algorithm-1 flags select the estimator:
//   coala         -> average_future_episodes=true,  normalize_current=true
//   mfos          -> average_future_episodes=true,  normalize_current=false
//   batch_unaware -> both false
inline AdvantageSet compute_advantages(const MetaTrajectoryBatch& batch,
                                       const ReturnsConfig& cfg,
                                       EstimatorMode mode) {
  batch.validate();
  const int b_count = batch.batch_size;
  const int seq_len = batch.length();
  AdvantageSet out;
  out.value_targets = compute_value_targets(batch, cfg);

  std::vector<double> delta(batch.rewards.size());
  for (int b = 0; b < b_count; ++b)
    for (int t = 0; t < seq_len; ++t) {
      const std::size_t i = batch.idx(b, t);
      const double next_v =
          t + 1 < seq_len ? batch.values[batch.idx(b, t + 1)] : 0.0;
      delta[i] = batch.rewards[i] * cfg.reward_rescaling +
                 cfg.value_discount * next_v - batch.values[i];
    }
  const bool avg_future = mode != EstimatorMode::batch_unaware;
  const bool norm_cur = mode == EstimatorMode::coala;
  std::vector<double> zero(batch.rewards.size(), 0.0);
  out.advantages = batch_lambda_returns(
      delta, cfg.value_discount * cfg.lambda_gae, zero, /*lambda=*/1.0,
      avg_future, norm_cur, batch.inner_episode_length, b_count);
  return out;
}

// Center values to zero mean (and optionally unit variance). Groups are
// centered independently by the caller; empty spans are ignored.
inline void center_advantages(std::span<double> values,
                              bool scale_variance = false) {
  if (values.empty()) return;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  for (double& v : values) v -= mean;
  if (scale_variance) {
    double var = 0.0;
    for (double v : values) var += v * v;
    var /= static_cast<double>(values.size());
    const double sd = std::sqrt(var);
    if (sd > 1e-12)
      for (double& v : values) v /= sd;
  }
}

// Centering applied separately per opponent kind across a set of advantage
// arrays from one meta-batch.
inline void advantage_normalize(std::span<std::vector<double>*> groups,
                                std::span<const OpponentKind> kinds,
                                bool scale_variance = false) {
  if (groups.size() != kinds.size())
    throw UsageError("advantage_normalize: group/kind mismatch");
  for (OpponentKind which : {OpponentKind::naive, OpponentKind::meta}) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (kinds[g] != which) continue;
      for (double v : *groups[g]) sum += v;
      count += groups[g]->size();
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (kinds[g] != which) continue;
      for (double& v : *groups[g]) v -= mean;
    }
    if (scale_variance) {
      double var = 0.0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (kinds[g] != which) continue;
        for (double v : *groups[g]) var += v * v;
      }
      var /= static_cast<double>(count);
      const double sd = std::sqrt(var);
      if (sd > 1e-12)
        for (std::size_t g = 0; g < groups.size(); ++g) {
          if (kinds[g] != which) continue;
          for (double& v : *groups[g]) v /= sd;
        }
    }
  }
}

}  // namespace coala::estimators

#endif  // COALA_ESTIMATORS_RETURNS_HPP_
