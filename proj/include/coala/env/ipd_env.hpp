#ifndef COALA_ENV_IPD_ENV_HPP_
#define COALA_ENV_IPD_ENV_HPP_

#include <array>
#include <vector>

#include "coala/env/env.hpp"
#include "coala/util/errors.hpp"
#include "coala/util/rng.hpp"

namespace coala::env {

// Finite iterated prisoner's dilemma. Five states: s0 plus the four
// previous joint actions (a1, a2). Each agent observes the state with the
// action pair ordered (own, other's), one-hot encoded.
class IpdEnv {
 public:
  static constexpr int kObsDim = 5;
  static constexpr int kActions = 2;  // 0 = cooperate, 1 = defect
  static constexpr int kCooperate = 0;
  static constexpr int kDefect = 1;

  explicit IpdEnv(int episode_length) : episode_length_(episode_length) {
    if (episode_length < 1) throw ConfigError("IpdEnv: T must be positive");
  }

  int obs_dim() const { return kObsDim; }
  int num_actions() const { return kActions; }
  int episode_length() const { return episode_length_; }

  std::array<std::vector<float>, 2> reset(Rng& /*rng*/) {
    state_ = 0;  // s0
    t_ = 0;
    return {observe(0), observe(1)};
  }

  StepResult step(int a1, int a2, Rng& /*rng*/) {
    if ((a1 != 0 && a1 != 1) || (a2 != 0 && a2 != 1))
      throw UsageError("IpdEnv: action out of range");
    state_ = 1 + a1 * 2 + a2;  // 1=CC 2=CD 3=DC 4=DD
    ++t_;
    StepResult result;
    static constexpr double kR1[4] = {1.0, -1.0, 2.0, 0.0};
    static constexpr double kR2[4] = {1.0, 2.0, -1.0, 0.0};
    result.rewards[0] = kR1[state_ - 1];
    result.rewards[1] = kR2[state_ - 1];
    result.observations[0] = observe(0);
    result.observations[1] = observe(1);
    result.done = t_ >= episode_length_;
    return result;
  }

  int state() const { return state_; }

 private:
  std::vector<float> observe(int agent) const {
    std::vector<float> obs(kObsDim, 0.0f);
    int s = state_;
    if (agent == 1 && (s == 2 || s == 3)) s = s == 2 ? 3 : 2;  // swap the pair
    obs[s] = 1.0f;
    return obs;
  }

  int episode_length_;
  int state_ = 0;
  int t_ = 0;
};

}  // namespace coala::env

#endif  // COALA_ENV_IPD_ENV_HPP_
