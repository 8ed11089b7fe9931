#ifndef COALA_ANALYTIC_IPD_HPP_
#define COALA_ANALYTIC_IPD_HPP_

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "coala/autodiff/dual.hpp"
#include "coala/autodiff/linsolve.hpp"
#include "coala/util/errors.hpp"

namespace coala::analytic {

// State order used throughout this module, from agent 1's viewpoint:
// index 0..3 = (CC, CD, DC, DD) where the pair is (a1, a2).
// A policy's five logits are in *own* perspective:
// [initial, CC, CD, DC, DD] with CD meaning "I cooperated, they defected".
inline constexpr int kStates = 4;
inline constexpr int kParams = 5;

// Own-perspective index of state s as seen by the other agent (CD <-> DC).
inline int mirror_state(int s) {
  switch (s) {
    case 1: return 2;
    case 2: return 1;
    default: return s;
  }
}

struct TabularPolicy {
  std::array<double, kParams> logits{};
};

struct IpdPayoffs {
  std::array<double, kStates> r1{1.0, -1.0, 2.0, 0.0};
  std::array<double, kStates> r2{1.0, 2.0, -1.0, 0.0};
  double gamma = 0.95;
};

// Which objective simulated naive learners ascend. `own` is the standard
// reading (each learner maximizes its own return); `coplayer` makes the
// learner ascend the shaping agent's return instead, kept for comparison.
enum class NaiveObjective { own, coplayer };

namespace detail {

// Cooperation probabilities of both agents in each environment state,
// plus initial cooperation probabilities. Everything downstream is built
// from these, so policies may be given in logit or probability space.
template <class T>
struct CoopProbs {
  std::array<T, kStates> p1;  // P(agent1 cooperates | state)
  std::array<T, kStates> p2;  // P(agent2 cooperates | state)
  T p1_init;
  T p2_init;
};

template <class T>
CoopProbs<T> coop_from_logits(std::span<const T> phi1, std::span<const T> phi2) {
  using coala::autodiff::sigmoid;
  CoopProbs<T> c{};
  c.p1_init = sigmoid(phi1[0]);
  c.p2_init = sigmoid(phi2[0]);
  for (int s = 0; s < kStates; ++s) {
    c.p1[s] = sigmoid(phi1[1 + s]);
    c.p2[s] = sigmoid(phi2[1 + mirror_state(s)]);
  }
  return c;
}

template <class T>
CoopProbs<T> coop_from_probs(std::span<const T> p1, std::span<const T> p2) {
  CoopProbs<T> c{};
  c.p1_init = p1[0];
  c.p2_init = p2[0];
  for (int s = 0; s < kStates; ++s) {
    c.p1[s] = p1[1 + s];
    c.p2[s] = p2[1 + mirror_state(s)];
  }
  return c;
}

}  // namespace detail

// Column-stochastic transition matrix m (m[next*4+s] = P(next | s)) and the
// initial state distribution implied by the two policies.
template <class T>
std::pair<std::array<T, kStates * kStates>, std::array<T, kStates>>
markov_and_s0(const detail::CoopProbs<T>& c) {
  std::array<T, kStates * kStates> m{};
  for (int s = 0; s < kStates; ++s) {
    const T a = c.p1[s];
    const T b = c.p2[s];
    m[0 * kStates + s] = a * b;
    m[1 * kStates + s] = a * (T(1.0) - b);
    m[2 * kStates + s] = (T(1.0) - a) * b;
    m[3 * kStates + s] = (T(1.0) - a) * (T(1.0) - b);
  }
  std::array<T, kStates> s0{};
  s0[0] = c.p1_init * c.p2_init;
  s0[1] = c.p1_init * (T(1.0) - c.p2_init);
  s0[2] = (T(1.0) - c.p1_init) * c.p2_init;
  s0[3] = (T(1.0) - c.p1_init) * (T(1.0) - c.p2_init);
  return {m, s0};
}

template <class T>
std::pair<std::array<T, kStates * kStates>, std::array<T, kStates>>
markov_and_s0(std::span<const T> phi1, std::span<const T> phi2) {
  return markov_and_s0(detail::coop_from_logits(phi1, phi2));
}

inline std::pair<std::array<double, kStates * kStates>,
                 std::array<double, kStates>>
markov_and_s0(const TabularPolicy& phi1, const TabularPolicy& phi2) {
  return markov_and_s0<double>(std::span<const double>(phi1.logits),
                               std::span<const double>(phi2.logits));
}

// Exact discounted returns (J1, J2): J^i = r^i . (I - gamma M)^{-1} s0,
// the closed form of the discounted state-occupancy series.
template <class T>
std::pair<T, T> expected_return(const detail::CoopProbs<T>& c,
                                const IpdPayoffs& pay) {
  auto [m, s0] = markov_and_s0(c);
  std::vector<T> a(kStates * kStates);
  for (int r = 0; r < kStates; ++r)
    for (int s = 0; s < kStates; ++s)
      a[r * kStates + s] =
          T(r == s ? 1.0 : 0.0) - pay.gamma * m[r * kStates + s];
  std::vector<T> rhs(s0.begin(), s0.end());
  std::vector<T> occupancy = coala::autodiff::solve_linear(std::move(a), std::move(rhs));
  T j1(0.0), j2(0.0);
  for (int s = 0; s < kStates; ++s) {
    j1 += occupancy[s] * pay.r1[s];
    j2 += occupancy[s] * pay.r2[s];
  }
  return {j1, j2};
}

template <class T>
std::pair<T, T> expected_return(std::span<const T> phi1, std::span<const T> phi2,
                                const IpdPayoffs& pay) {
  return expected_return(detail::coop_from_logits(phi1, phi2), pay);
}

inline std::pair<double, double> expected_return(const TabularPolicy& phi1,
                                                 const TabularPolicy& phi2,
                                                 const IpdPayoffs& pay) {
  return expected_return<double>(std::span<const double>(phi1.logits),
                                 std::span<const double>(phi2.logits), pay);
}

// Return of the first-listed agent; the argument order fixes the roles.
template <class T>
T own_return(std::span<const T> me, std::span<const T> other,
             const IpdPayoffs& pay) {
  return expected_return(me, other, pay).first;
}

namespace detail {

// Gradient of the naive learner's objective w.r.t. its own logits, with any
// outer tangents carried through (T may be a dual type).
template <class T>
std::vector<T> naive_objective_grad(std::span<const T> psi,
                                    std::span<const T> phi_other,
                                    const IpdPayoffs& pay,
                                    NaiveObjective objective) {
  std::vector<T> phi_copy(phi_other.begin(), phi_other.end());
  // psi plays agent 1 in this evaluation, so .first is the naive learner's
  // own return and .second the co-player's.
  auto fn = [&phi_copy, &pay, objective](auto psi_in_span) ->
      typename std::decay_t<decltype(psi_in_span)>::value_type {
        using I = typename std::decay_t<decltype(psi_in_span)>::value_type;
        std::vector<I> phi_in(phi_copy.size());
        for (std::size_t i = 0; i < phi_copy.size(); ++i)
          phi_in[i] = I(phi_copy[i]);
        auto both = expected_return(std::span<const I>(psi_in_span),
                                    std::span<const I>(phi_in), pay);
        return objective == NaiveObjective::own ? both.first
                                                       : both.second;
      };
  return coala::autodiff::inner_grad(fn, psi);
}

}  // namespace detail

// One naive ascent step: psi + eta * d(objective)/d(psi). Templated so the
// step can be unrolled inside an outer differentiation.
template <class T>
std::vector<T> naive_step_t(std::span<const T> psi, std::span<const T> phi_other,
                            const IpdPayoffs& pay, double eta,
                            NaiveObjective objective = NaiveObjective::own) {
  std::vector<T> grad =
      detail::naive_objective_grad(psi, phi_other, pay, objective);
  std::vector<T> out(psi.begin(), psi.end());
  for (int i = 0; i < kParams; ++i) out[i] += eta * grad[i];
  return out;
}

inline TabularPolicy naive_step(const TabularPolicy& psi,
                                const TabularPolicy& phi_other,
                                const IpdPayoffs& pay, double eta,
                                NaiveObjective objective = NaiveObjective::own) {
  auto out = naive_step_t<double>(std::span<const double>(psi.logits),
                                  std::span<const double>(phi_other.logits),
                                  pay, eta, objective);
  TabularPolicy r;
  for (int i = 0; i < kParams; ++i) r.logits[i] = out[i];
  return r;
}

// Shaping objective: sum_{m=0}^{M} J^i(phi, psi_m) with psi_m the naive
// learner's parameters after m exact ascent steps.
template <class T>
T shaping_objective(std::span<const T> phi_meta, std::span<const T> psi_init,
                    const IpdPayoffs& pay, int lookahead_steps, double eta_naive,
                    NaiveObjective objective = NaiveObjective::own) {
  std::vector<T> psi(psi_init.begin(), psi_init.end());
  T total = own_return(phi_meta, std::span<const T>(psi), pay);
  for (int m = 0; m < lookahead_steps; ++m) {
    std::vector<T> grad = detail::naive_objective_grad(
        std::span<const T>(psi), phi_meta, pay, objective);
    for (int i = 0; i < kParams; ++i) psi[i] += eta_naive * grad[i];
    total += own_return(phi_meta, std::span<const T>(psi), pay);
  }
  return total;
}

// Total derivative of the shaping objective w.r.t. the meta agent's logits,
// differentiating through every unrolled naive update.
inline std::array<double, kParams> shaping_gradient(
    const TabularPolicy& phi_meta, const TabularPolicy& psi_init,
    const IpdPayoffs& pay, int lookahead_steps, double eta_naive,
    NaiveObjective objective = NaiveObjective::own) {
  auto f = [&](auto phi_span) ->
      typename std::decay_t<decltype(phi_span)>::value_type {
        using T = typename std::decay_t<decltype(phi_span)>::value_type;
        std::vector<T> psi0(kParams);
        for (int i = 0; i < kParams; ++i) psi0[i] = T(psi_init.logits[i]);
        return shaping_objective(std::span<const T>(phi_span),
                                 std::span<const T>(psi0), pay,
                                 lookahead_steps, eta_naive, objective);
      };
  auto g = coala::autodiff::grad_nested(
      f, std::span<const double>(phi_meta.logits));
  std::array<double, kParams> out{};
  for (int i = 0; i < kParams; ++i) out[i] = g[i];
  return out;
}

// Look-ahead objective: only the final return after `lookahead_steps`
// simulated naive updates of the co-player, started from its current
// parameters.
template <class T>
T lola_objective(std::span<const T> phi_i, std::span<const T> phi_minus_i,
                 const IpdPayoffs& pay, int lookahead_steps, double alpha,
                 NaiveObjective objective = NaiveObjective::own) {
  std::vector<T> psi(phi_minus_i.begin(), phi_minus_i.end());
  for (int q = 0; q < lookahead_steps; ++q) {
    std::vector<T> grad = detail::naive_objective_grad(
        std::span<const T>(psi), phi_i, pay, objective);
    for (int i = 0; i < kParams; ++i) psi[i] += alpha * grad[i];
  }
  return own_return(phi_i, std::span<const T>(psi), pay);
}

inline std::array<double, kParams> lola_dice_gradient(
    const TabularPolicy& phi_i, const TabularPolicy& phi_minus_i,
    const IpdPayoffs& pay, int lookahead_steps, double alpha,
    NaiveObjective objective = NaiveObjective::own) {
  if (lookahead_steps < 1)
    throw UsageError("lola_dice_gradient: needs at least one look-ahead");
  auto f = [&](auto phi_span) ->
      typename std::decay_t<decltype(phi_span)>::value_type {
        using T = typename std::decay_t<decltype(phi_span)>::value_type;
        std::vector<T> other(kParams);
        for (int i = 0; i < kParams; ++i) other[i] = T(phi_minus_i.logits[i]);
        return lola_objective(std::span<const T>(phi_span),
                              std::span<const T>(other), pay, lookahead_steps,
                              alpha, objective);
      };
  auto g =
      coala::autodiff::grad_nested(f, std::span<const double>(phi_i.logits));
  std::array<double, kParams> out{};
  for (int i = 0; i < kParams; ++i) out[i] = g[i];
  return out;
}

// Partial gradient of the agent's own return w.r.t. its own logits, the
// update used against co-players that are not being shaped.
inline std::array<double, kParams> partial_gradient(const TabularPolicy& phi_i,
                                                    const TabularPolicy& phi_minus_i,
                                                    const IpdPayoffs& pay) {
  auto f = [&](auto phi_span) ->
      typename std::decay_t<decltype(phi_span)>::value_type {
        using T = typename std::decay_t<decltype(phi_span)>::value_type;
        std::vector<T> other(kParams);
        for (int i = 0; i < kParams; ++i) other[i] = T(phi_minus_i.logits[i]);
        return own_return(std::span<const T>(phi_span),
                          std::span<const T>(other), pay);
      };
  auto g =
      coala::autodiff::grad_forward(f, std::span<const double>(phi_i.logits));
  std::array<double, kParams> out{};
  for (int i = 0; i < kParams; ++i) out[i] = g[i];
  return out;
}

// Probability-space return (policies given directly as cooperation
// probabilities), used by the simplex projection probes.
template <class T>
T own_return_probs(std::span<const T> p_me, std::span<const T> p_other,
                   const IpdPayoffs& pay) {
  return expected_return(detail::coop_from_probs(p_me, p_other), pay).first;
}

}  // namespace coala::analytic

#endif  // COALA_ANALYTIC_IPD_HPP_
