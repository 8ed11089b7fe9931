#ifndef COALA_ANALYTIC_EXPERIMENTS_HPP_
#define COALA_ANALYTIC_EXPERIMENTS_HPP_

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coala/analytic/ipd.hpp"
#include "coala/analytic/zd.hpp"
#include "coala/training/optim.hpp"
#include "coala/util/errors.hpp"
#include "coala/util/rng.hpp"

namespace coala::analytic {

// How the two meta agents are initialized.
enum class PolicyInit { random, defect, tit_for_tat };

inline PolicyInit policy_init_from_string(const std::string& s) {
  if (s == "random") return PolicyInit::random;
  if (s == "defect") return PolicyInit::defect;
  if (s == "tft") return PolicyInit::tit_for_tat;
  throw ConfigError("unknown policy init: " + s);
}

// Log-odds of probability p; the defect/tft corners use p = 0.01 / 0.99 to
// keep logits finite.
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline TabularPolicy make_init(PolicyInit kind, Rng& rng) {
  TabularPolicy p;
  switch (kind) {
    case PolicyInit::random:
      for (auto& l : p.logits) l = rng.normal();
      return p;
    case PolicyInit::defect:
      p.logits.fill(logit(0.01));
      return p;
    case PolicyInit::tit_for_tat:
      // Cooperate initially, after CC and after DC (the co-player
      // cooperated); defect after CD and DD.
      p.logits = {logit(0.99), logit(0.99), logit(0.01), logit(0.99),
                  logit(0.01)};
      return p;
  }
  throw ConfigError("bad init");
}

struct MixedGroupConfig {
  double p_naive = 0.75;        // probability weight on the shaping gradient
  int metabatch = 4;            // fresh naive learners per step
  double eta_naive = 5.0;       // naive learner step size
  double eta_meta = 0.005;      // meta AdamW learning rate
  int lookahead = 20;           // naive steps per meta trajectory (M)
  int steps = 2000;             // meta training steps
  double gamma = 0.95;
  double naive_init_scale = 1.0;  // stddev of fresh naive logits
  NaiveObjective naive_objective = NaiveObjective::own;
  training::OptimizerConfig optimizer{training::OptimizerKind::adamw, 0.005,
                                      0.9, 0.999, 1e-8, 1e-4};
  // Optional schedule: after switch_step, p_naive becomes p_naive_phase2
  // (used to replay the extortion-to-cooperation hand-off).
  int switch_step = -1;
  double p_naive_phase2 = 0.0;
};

// One recorded step of mixed-group training. Rewards are per-step
// (normalized by 1 - gamma). shaping_* come from evaluating against a fresh
// naive learner trajectory; naive_* are that learner's own rewards.
struct MixedGroupRow {
  int step = 0;
  double shaping_reward1 = 0.0;
  double shaping_reward2 = 0.0;
  double shaping_reward1_final = 0.0;  // last look-ahead step only
  double shaping_reward2_final = 0.0;
  double naive_reward1_final = 0.0;    // co-player's reward at last step
  double naive_reward2_final = 0.0;
  double otherplay_reward1 = 0.0;
  double otherplay_reward2 = 0.0;
  std::array<double, kParams> params1{};
  std::array<double, kParams> params2{};
};

struct MixedGroupTrace {
  std::vector<MixedGroupRow> rows;
};

namespace detail {

// Mean per-step rewards of meta and naive over one simulated naive
// learning trajectory, plus the final-step values.
struct ShapingEval {
  double meta_mean = 0.0;
  double meta_final = 0.0;
  double naive_final = 0.0;
};

inline ShapingEval eval_shaping(const TabularPolicy& meta,
                                const TabularPolicy& naive_init,
                                const IpdPayoffs& pay, int lookahead,
                                double eta_naive, NaiveObjective objective) {
  ShapingEval ev;
  const double norm = 1.0 - pay.gamma;
  std::vector<double> psi(naive_init.logits.begin(), naive_init.logits.end());
  double total = 0.0;
  double jm = 0.0, jn = 0.0;
  for (int m = 0; m <= lookahead; ++m) {
    if (m > 0)
      psi = naive_step_t<double>(std::span<const double>(psi),
                                 std::span<const double>(meta.logits), pay,
                                 eta_naive, objective);
    // Naive plays agent 1 so that its own return is .first.
    auto both = expected_return<double>(std::span<const double>(psi),
                                        std::span<const double>(meta.logits),
                                        pay);
    jn = both.first;
    jm = both.second;
    total += jm;
  }
  ev.meta_mean = norm * total / (lookahead + 1);
  ev.meta_final = norm * jm;
  ev.naive_final = norm * jn;
  return ev;
}

inline std::array<double, kParams> mean_shaping_gradient(
    const TabularPolicy& meta, const IpdPayoffs& pay,
    const MixedGroupConfig& cfg, Rng& rng) {
  std::array<double, kParams> acc{};
  for (int j = 0; j < cfg.metabatch; ++j) {
    TabularPolicy psi;
    for (auto& l : psi.logits) l = cfg.naive_init_scale * rng.normal();
    auto g = shaping_gradient(meta, psi, pay, cfg.lookahead, cfg.eta_naive,
                              cfg.naive_objective);
    for (int i = 0; i < kParams; ++i) acc[i] += g[i];
  }
  for (int i = 0; i < kParams; ++i) acc[i] /= cfg.metabatch;
  return acc;
}

}  // namespace detail

// Trains two meta agents. Each step, every agent ascends
//   p_naive * (mean shaping gradient over fresh naive inits)
//   + (1 - p_naive) * (partial gradient against the other meta agent),
// with simultaneous updates through AdamW (or the configured optimizer).
inline MixedGroupTrace mixed_group_train(const MixedGroupConfig& cfg,
                                         const TabularPolicy& init1,
                                         const TabularPolicy& init2,
                                         std::uint64_t seed) {
  IpdPayoffs pay;
  pay.gamma = cfg.gamma;
  const double norm = 1.0 - pay.gamma;

  std::array<TabularPolicy, 2> agents{init1, init2};
  std::array<training::Optimizer<double>, 2> opt{
      training::Optimizer<double>(cfg.optimizer, kParams),
      training::Optimizer<double>(cfg.optimizer, kParams)};

  MixedGroupTrace trace;
  trace.rows.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    const double p_naive = (cfg.switch_step >= 0 && step >= cfg.switch_step)
                               ? cfg.p_naive_phase2
                               : cfg.p_naive;
    std::array<std::array<double, kParams>, 2> grads{};
    for (int a = 0; a < 2; ++a) {
      const TabularPolicy& self = agents[a];
      const TabularPolicy& other = agents[1 - a];
      std::array<double, kParams> g{};
      if (p_naive > 0.0) {
        Rng rng = Rng::stream(seed, {0xA11Cu, static_cast<std::uint64_t>(step),
                                     static_cast<std::uint64_t>(a)});
        auto gs = detail::mean_shaping_gradient(self, pay, cfg, rng);
        for (int i = 0; i < kParams; ++i) g[i] += p_naive * gs[i];
      }
      if (p_naive < 1.0) {
        auto gp = partial_gradient(self, other, pay);
        for (int i = 0; i < kParams; ++i) g[i] += (1.0 - p_naive) * gp[i];
      }
      grads[a] = g;
    }
    for (int a = 0; a < 2; ++a) {
      std::array<double, kParams> descent{};
      for (int i = 0; i < kParams; ++i) descent[i] = -grads[a][i];
      opt[a].step(std::span<double>(agents[a].logits),
                  std::span<const double>(descent));
      for (double l : agents[a].logits)
        if (!std::isfinite(l))
          throw NumericError("mixed_group_train: non-finite parameters");
    }

    MixedGroupRow row;
    row.step = step;
    Rng eval_rng = Rng::stream(seed, {0xE7A1u, static_cast<std::uint64_t>(step)});
    TabularPolicy eval_naive;
    for (auto& l : eval_naive.logits) l = cfg.naive_init_scale * eval_rng.normal();
    auto ev1 = detail::eval_shaping(agents[0], eval_naive, pay, cfg.lookahead,
                                    cfg.eta_naive, cfg.naive_objective);
    auto ev2 = detail::eval_shaping(agents[1], eval_naive, pay, cfg.lookahead,
                                    cfg.eta_naive, cfg.naive_objective);
    row.shaping_reward1 = ev1.meta_mean;
    row.shaping_reward2 = ev2.meta_mean;
    row.shaping_reward1_final = ev1.meta_final;
    row.shaping_reward2_final = ev2.meta_final;
    row.naive_reward1_final = ev1.naive_final;
    row.naive_reward2_final = ev2.naive_final;
    auto other_play = expected_return(agents[0], agents[1], pay);
    row.otherplay_reward1 = norm * other_play.first;
    row.otherplay_reward2 = norm * other_play.second;
    row.params1 = agents[0].logits;
    row.params2 = agents[1].logits;
    trace.rows.push_back(row);
  }
  return trace;
}

// --- LOLA-DICE training --------------------------------------------------

struct LolaConfig {
  int lookahead = 1;
  double alpha = 10.0;     // naive step size inside the look-ahead
  double eta_meta = 0.005;
  int steps = 2000;
  double gamma = 0.95;
  double p_mix = 1.0;  // weight on the LOLA gradient; rest on the partial
  NaiveObjective naive_objective = NaiveObjective::own;
  training::OptimizerConfig optimizer{training::OptimizerKind::adamw, 0.005,
                                      0.9, 0.999, 1e-8, 1e-4};
};

struct LolaRow {
  int step = 0;
  double reward1 = 0.0;  // per-step other-play rewards
  double reward2 = 0.0;
  std::array<double, kParams> params1{};
  std::array<double, kParams> params2{};
};

// Two agents trained against each other with the look-ahead gradient
// (optionally mixed with the plain partial gradient).
inline std::vector<LolaRow> lola_train(const LolaConfig& cfg,
                                       const TabularPolicy& init1,
                                       const TabularPolicy& init2) {
  IpdPayoffs pay;
  pay.gamma = cfg.gamma;
  const double norm = 1.0 - pay.gamma;
  std::array<TabularPolicy, 2> agents{init1, init2};
  std::array<training::Optimizer<double>, 2> opt{
      training::Optimizer<double>(cfg.optimizer, kParams),
      training::Optimizer<double>(cfg.optimizer, kParams)};
  std::vector<LolaRow> rows;
  rows.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    std::array<std::array<double, kParams>, 2> grads{};
    for (int a = 0; a < 2; ++a) {
      auto gl = lola_dice_gradient(agents[a], agents[1 - a], pay,
                                   cfg.lookahead, cfg.alpha,
                                   cfg.naive_objective);
      std::array<double, kParams> g{};
      for (int i = 0; i < kParams; ++i) g[i] = cfg.p_mix * gl[i];
      if (cfg.p_mix < 1.0) {
        auto gp = partial_gradient(agents[a], agents[1 - a], pay);
        for (int i = 0; i < kParams; ++i) g[i] += (1.0 - cfg.p_mix) * gp[i];
      }
      grads[a] = g;
    }
    for (int a = 0; a < 2; ++a) {
      std::array<double, kParams> descent{};
      for (int i = 0; i < kParams; ++i) descent[i] = -grads[a][i];
      opt[a].step(std::span<double>(agents[a].logits),
                  std::span<const double>(descent));
      for (double l : agents[a].logits)
        if (!std::isfinite(l)) throw NumericError("lola_train: non-finite parameters");
    }
    LolaRow row;
    row.step = step;
    auto j = expected_return(agents[0], agents[1], pay);
    row.reward1 = norm * j.first;
    row.reward2 = norm * j.second;
    row.params1 = agents[0].logits;
    row.params2 = agents[1].logits;
    rows.push_back(row);
  }
  return rows;
}

// Train a fresh naive learner against a fixed policy; returns per-step
// rewards (naive first) after each of `steps` exact ascent steps.
struct NaiveVsFixedRow {
  int step = 0;
  double naive_reward = 0.0;
  double fixed_reward = 0.0;
};

inline std::vector<NaiveVsFixedRow> train_naive_vs_fixed(
    const TabularPolicy& fixed, const TabularPolicy& naive_init,
    const IpdPayoffs& pay, double eta_naive, int steps,
    NaiveObjective objective = NaiveObjective::own) {
  const double norm = 1.0 - pay.gamma;
  std::vector<NaiveVsFixedRow> rows;
  std::vector<double> psi(naive_init.logits.begin(), naive_init.logits.end());
  for (int s = 0; s < steps; ++s) {
    psi = naive_step_t<double>(std::span<const double>(psi),
                               std::span<const double>(fixed.logits), pay,
                               eta_naive, objective);
    auto j = expected_return<double>(std::span<const double>(psi),
                                     std::span<const double>(fixed.logits),
                                     pay);
    rows.push_back({s, norm * j.first, norm * j.second});
  }
  return rows;
}

// Mixed-group gradient in probability space at the given policy point,
// used by the simplex projection probes (both agents at the same point).
inline std::array<double, 5> probability_space_group_gradient(
    std::span<const double> probs, double p_naive, const MixedGroupConfig& cfg,
    std::uint64_t seed) {
  IpdPayoffs pay;
  pay.gamma = cfg.gamma;
  std::array<double, 5> acc{};
  // Shaping part: naive learners remain logit-parameterized.
  if (p_naive > 0.0) {
    Rng rng = Rng::stream(seed, {0x9A0Bu});
    for (int j = 0; j < cfg.metabatch; ++j) {
      std::array<double, kParams> psi0{};
      for (auto& l : psi0) l = cfg.naive_init_scale * rng.normal();
      auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
        using T = typename std::decay_t<decltype(xs)>::value_type;
        std::vector<T> psi(kParams);
        for (int i = 0; i < kParams; ++i) psi[i] = T(psi0[i]);
        T total(0.0);
        {
          // m = 0 term.
          std::vector<T> psi_probs(kParams);
          for (int i = 0; i < kParams; ++i)
            psi_probs[i] = coala::autodiff::sigmoid(psi[i]);
          total += own_return_probs(std::span<const T>(xs),
                                    std::span<const T>(psi_probs), pay);
        }
        for (int m = 0; m < cfg.lookahead; ++m) {
          // The naive learner best-responds to the probe's probabilities.
          std::vector<T> probe(xs.begin(), xs.end());
          auto grad = coala::autodiff::inner_grad(
              [&probe, &pay, &cfg](auto ys) ->
              typename std::decay_t<decltype(ys)>::value_type {
                using I = typename std::decay_t<decltype(ys)>::value_type;
                std::vector<I> my_probs(kParams);
                for (int i = 0; i < kParams; ++i)
                  my_probs[i] = coala::autodiff::sigmoid(ys[i]);
                std::vector<I> probe_probs(kParams);
                for (int i = 0; i < kParams; ++i)
                  probe_probs[i] = I(probe[i]);
                auto both = expected_return(
                    detail::coop_from_probs(std::span<const I>(my_probs),
                                            std::span<const I>(probe_probs)),
                    pay);
                return cfg.naive_objective == NaiveObjective::own
                           ? both.first
                           : both.second;
              },
              std::span<const T>(psi));
          for (int i = 0; i < kParams; ++i) psi[i] += cfg.eta_naive * grad[i];
          std::vector<T> psi_probs(kParams);
          for (int i = 0; i < kParams; ++i)
            psi_probs[i] = coala::autodiff::sigmoid(psi[i]);
          total += own_return_probs(std::span<const T>(xs),
                                    std::span<const T>(psi_probs), pay);
        }
        return total;
      };
      auto g = coala::autodiff::grad_nested(f, probs);
      for (int i = 0; i < 5; ++i) acc[i] += p_naive * g[i] / cfg.metabatch;
    }
  }
  if (p_naive < 1.0) {
    auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      std::vector<T> other(5);
      for (int i = 0; i < 5; ++i) other[i] = T(probs[i]);
      return own_return_probs(std::span<const T>(xs),
                              std::span<const T>(other), pay);
    };
    auto g = coala::autodiff::grad_forward(f, probs);
    for (int i = 0; i < 5; ++i) acc[i] += (1.0 - p_naive) * g[i];
  }
  return acc;
}

}  // namespace coala::analytic

#endif  // COALA_ANALYTIC_EXPERIMENTS_HPP_
