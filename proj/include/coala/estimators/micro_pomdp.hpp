#ifndef COALA_ESTIMATORS_MICRO_POMDP_HPP_
#define COALA_ESTIMATORS_MICRO_POMDP_HPP_

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "coala/autodiff/dual.hpp"
#include "coala/estimators/reinforce.hpp"
#include "coala/estimators/returns.hpp"

namespace coala::estimators::micro {

// Fully enumerable instance of the batched co-player shaping POMDP:
// two actions, deterministic rewards, T = 1, M = 2, B = 2, and a
// one-parameter logit naive learner updated once at the episode boundary
// with a centered-advantage REINFORCE step. Small enough that every
// expectation is an exact finite sum, which makes it the ground truth for
// the estimator checks.
struct MicroConfig {
  static constexpr int kBatch = 2;     // B
  static constexpr int kEpisodes = 2;  // M
  double eta = 0.7;                    // naive learner step size
  double psi0 = 0.3;                   // naive initial logit
  // rewards[mine][theirs], actions 0/1
  std::array<std::array<double, 2>, 2> meta_reward{{{1.0, -1.0}, {2.0, 0.0}}};
  std::array<std::array<double, 2>, 2> naive_reward{{{1.0, -1.0}, {2.0, 0.0}}};
};

// Meta-policy conditioning. `history` uses three parameters: episode-1
// logit, episode-2 logit, and a coefficient on the own episode-1 action
// (long-history context). `inner` is a single logit shared by both
// episodes (inner-episode context only), the Theorem-2 regime.
enum class MetaPolicyKind { history, inner };

inline int param_count(MetaPolicyKind kind) {
  return kind == MetaPolicyKind::history ? 3 : 1;
}

namespace detail {

template <class T>
T action_prob(const T& logit, int action) {
  using coala::autodiff::sigmoid;
  T p = sigmoid(logit);
  return action == 1 ? p : T(1.0) - p;
}

template <class T>
T meta_logit(std::span<const T> theta, MetaPolicyKind kind, int episode,
             int own_first_action) {
  if (kind == MetaPolicyKind::inner) return theta[0];
  if (episode == 0) return theta[0];
  return theta[1] + theta[2] * (own_first_action == 1 ? 1.0 : -1.0);
}

// d log pi / d theta for the taken action at (episode, b); closed form for
// the logit policy so the oracle does not depend on the dual machinery.
inline std::array<double, 3> meta_logp_grad(std::span<const double> theta,
                                            MetaPolicyKind kind, int episode,
                                            int own_first_action, int action) {
  const double z = meta_logit(theta, kind, episode, own_first_action);
  const double p = 1.0 / (1.0 + std::exp(-z));
  const double dz = action - p;
  std::array<double, 3> g{0.0, 0.0, 0.0};
  if (kind == MetaPolicyKind::inner) {
    g[0] = dz;
  } else if (episode == 0) {
    g[0] = dz;
  } else {
    g[1] = dz;
    g[2] = dz * (own_first_action == 1 ? 1.0 : -1.0);
  }
  return g;
}

// Naive learner's parameter after the boundary update, given the realized
// episode-1 batch. Centered-advantage REINFORCE on its own rewards:
// psi' = psi + eta * (1/B) sum_b (a_b - sigma(psi)) * (r_b - mean r).
template <class T>
T naive_updated_param(const T& psi0, const std::array<int, 2>& naive_actions,
                      const std::array<double, 2>& naive_rewards, double eta) {
  using coala::autodiff::inner_grad;
  const double mean_reward = 0.5 * (naive_rewards[0] + naive_rewards[1]);
  std::array<double, 2> adv{naive_rewards[0] - mean_reward,
                            naive_rewards[1] - mean_reward};
  // Surrogate (1/B) sum_b adv_b log pi(a_b); its psi-gradient is the update
  // direction. Computed with an inner differentiation level so outer duals
  // flow through when psi itself carries tangents.
  std::vector<T> psi{psi0};
  auto grad = inner_grad(
      [&naive_actions, &adv](auto ys) ->
      typename std::decay_t<decltype(ys)>::value_type {
        using I = typename std::decay_t<decltype(ys)>::value_type;
        I total(0.0);
        for (int b = 0; b < 2; ++b)
          total += adv[b] * log(action_prob(ys[0], naive_actions[b]));
        return total * 0.5;
      },
      std::span<const T>(psi));
  return psi0 + eta * grad[0];
}

}  // namespace detail

// Exact expected shaping return J̄(theta) of the micro-POMDP, by full
// enumeration of the 2^8 outcome paths. Differentiable via dual inputs.
template <class T>
T exact_expected_return(std::span<const T> theta, MetaPolicyKind kind,
                        const MicroConfig& cfg) {
  using detail::action_prob;
  using detail::meta_logit;
  T total(0.0);
  for (int e1 = 0; e1 < 16; ++e1) {
    const std::array<int, 2> a_meta1{(e1 >> 0) & 1, (e1 >> 1) & 1};
    const std::array<int, 2> a_naive1{(e1 >> 2) & 1, (e1 >> 3) & 1};
    T p1(1.0);
    std::array<double, 2> r_meta1{}, r_naive1{};
    for (int b = 0; b < 2; ++b) {
      p1 *= action_prob(meta_logit(theta, kind, 0, 0), a_meta1[b]) *
            detail::action_prob(T(cfg.psi0), a_naive1[b]);
      r_meta1[b] = cfg.meta_reward[a_meta1[b]][a_naive1[b]];
      r_naive1[b] = cfg.naive_reward[a_naive1[b]][a_meta1[b]];
    }
    const T psi1 =
        detail::naive_updated_param(T(cfg.psi0), a_naive1, r_naive1, cfg.eta);
    for (int e2 = 0; e2 < 16; ++e2) {
      const std::array<int, 2> a_meta2{(e2 >> 0) & 1, (e2 >> 1) & 1};
      const std::array<int, 2> a_naive2{(e2 >> 2) & 1, (e2 >> 3) & 1};
      T p2(1.0);
      double reward_sum = 0.0;
      for (int b = 0; b < 2; ++b) {
        p2 *= action_prob(meta_logit(theta, kind, 1, a_meta1[b]), a_meta2[b]) *
              action_prob(psi1, a_naive2[b]);
        reward_sum += cfg.meta_reward[a_meta2[b]][a_naive2[b]];
      }
      for (int b = 0; b < 2; ++b) reward_sum += r_meta1[b];
      total += p1 * p2 * (reward_sum / MicroConfig::kBatch);
    }
  }
  return total;
}

// Gradient of the exact expected return via forward-mode duals.
inline std::vector<double> exact_return_gradient(std::span<const double> theta,
                                                 MetaPolicyKind kind,
                                                 const MicroConfig& cfg) {
  return coala::autodiff::grad_nested(
      [kind, &cfg](auto ts) -> typename std::decay_t<decltype(ts)>::value_type {
        using T = typename std::decay_t<decltype(ts)>::value_type;
        return exact_expected_return<T>(ts, kind, cfg);
      },
      theta);
}

// Exactly enumerated expectation of the REINFORCE estimator under the
// given mode: sum over all outcome paths of P(path) * estimator(path).
inline std::vector<double> enumerated_estimator_expectation(
    std::span<const double> theta, MetaPolicyKind kind, EstimatorMode mode,
    const MicroConfig& cfg) {
  const int dim = param_count(kind);
  std::vector<double> acc(dim, 0.0);
  for (int e1 = 0; e1 < 16; ++e1) {
    const std::array<int, 2> a_meta1{(e1 >> 0) & 1, (e1 >> 1) & 1};
    const std::array<int, 2> a_naive1{(e1 >> 2) & 1, (e1 >> 3) & 1};
    double p1 = 1.0;
    std::array<double, 2> r_meta1{}, r_naive1{};
    for (int b = 0; b < 2; ++b) {
      p1 *= detail::action_prob(detail::meta_logit(theta, kind, 0, 0),
                                a_meta1[b]) *
            detail::action_prob(cfg.psi0, a_naive1[b]);
      r_meta1[b] = cfg.meta_reward[a_meta1[b]][a_naive1[b]];
      r_naive1[b] = cfg.naive_reward[a_naive1[b]][a_meta1[b]];
    }
    const double psi1 =
        detail::naive_updated_param(cfg.psi0, a_naive1, r_naive1, cfg.eta);
    for (int e2 = 0; e2 < 16; ++e2) {
      const std::array<int, 2> a_meta2{(e2 >> 0) & 1, (e2 >> 1) & 1};
      const std::array<int, 2> a_naive2{(e2 >> 2) & 1, (e2 >> 3) & 1};
      double p2 = 1.0;
      for (int b = 0; b < 2; ++b)
        p2 *= detail::action_prob(
                  detail::meta_logit(theta, kind, 1, a_meta1[b]), a_meta2[b]) *
              detail::action_prob(psi1, a_naive2[b]);

      MetaTrajectoryBatch batch;
      batch.batch_size = 2;
      batch.num_inner_episodes = 2;
      batch.inner_episode_length = 1;
      batch.actions = {a_meta1[0], a_meta2[0], a_meta1[1], a_meta2[1]};
      batch.rewards = {r_meta1[0], cfg.meta_reward[a_meta2[0]][a_naive2[0]],
                       r_meta1[1], cfg.meta_reward[a_meta2[1]][a_naive2[1]]};
      batch.behavior_log_probs.assign(4, 0.0);
      batch.values.assign(4, 0.0);
      std::vector<double> logp_grads(4 * dim, 0.0);
      for (int b = 0; b < 2; ++b)
        for (int m = 0; m < 2; ++m) {
          const int action = m == 0 ? a_meta1[b] : a_meta2[b];
          auto g = detail::meta_logp_grad(theta, kind, m, a_meta1[b], action);
          for (int p = 0; p < dim; ++p)
            logp_grads[batch.idx(b, m) * dim + p] = g[p];
        }
      auto est = reinforce_gradient(batch, logp_grads, dim, mode);
      const double weight = p1 * p2;
      for (int p = 0; p < dim; ++p) acc[p] += weight * est[p];
    }
  }
  return acc;
}

// Theorem-2 route: the total derivative of sum_m E[J(theta, psi_m)] where
// J is the analytically marginalized single-episode return and psi_1 is
// the naive learner's stochastic update. Only defined for the
// inner-episode-conditioned policy.
inline double theorem2_total_derivative(double theta, const MicroConfig& cfg) {
  auto objective = [&cfg](auto ts) ->
      typename std::decay_t<decltype(ts)>::value_type {
        using T = typename std::decay_t<decltype(ts)>::value_type;
        using detail::action_prob;
        const T& th = ts[0];
        // Marginalized one-episode return J(theta, psi).
        auto j_of = [&cfg](const T& theta_in, const T& psi) {
          T j(0.0);
          for (int mine = 0; mine < 2; ++mine)
            for (int theirs = 0; theirs < 2; ++theirs)
              j += action_prob(theta_in, mine) * action_prob(psi, theirs) *
                   cfg.meta_reward[mine][theirs];
          return j;
        };
        T total = j_of(th, T(cfg.psi0));  // m = 0 term
        // Expectation over the episode-1 batch of the m = 1 term.
        for (int e1 = 0; e1 < 16; ++e1) {
          const std::array<int, 2> a_meta1{(e1 >> 0) & 1, (e1 >> 1) & 1};
          const std::array<int, 2> a_naive1{(e1 >> 2) & 1, (e1 >> 3) & 1};
          T prob(1.0);
          std::array<double, 2> r_naive1{};
          for (int b = 0; b < 2; ++b) {
            prob *= action_prob(th, a_meta1[b]) *
                    action_prob(T(cfg.psi0), a_naive1[b]);
            r_naive1[b] = cfg.naive_reward[a_naive1[b]][a_meta1[b]];
          }
          const T psi1 = detail::naive_updated_param(T(cfg.psi0), a_naive1,
                                                     r_naive1, cfg.eta);
          total += prob * j_of(th, psi1);
        }
        return total;
      };
  std::vector<double> theta_vec{theta};
  auto g = coala::autodiff::grad_nested(objective,
                                        std::span<const double>(theta_vec));
  return g[0];
}

}  // namespace coala::estimators::micro

#endif  // COALA_ESTIMATORS_MICRO_POMDP_HPP_
