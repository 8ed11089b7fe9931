#ifndef COALA_ANALYTIC_ZD_HPP_
#define COALA_ANALYTIC_ZD_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "coala/analytic/ipd.hpp"
#include "coala/util/errors.hpp"

namespace coala::analytic {

// Zero-determinant extortion family for the prisoner's dilemma with
// payoffs (T, R, P, S) = (2, 1, 0, -1). Parameters: chi >= 1 and
// 0 < phi <= (P-S) / ((P-S) + chi (T-P)).
struct ZdParams {
  double chi = 1.0;
  double phi = 1.0 / 3.0;
};

inline double zd_phi_max(double chi) { return 1.0 / (1.0 + 2.0 * chi); }

inline bool zd_feasible(double chi, double phi) {
  return chi >= 1.0 && phi > 0.0 && phi <= zd_phi_max(chi) + 1e-12;
}

// Cooperation probabilities (p1..p4) for states (CC, CD, DC, DD) in own
// perspective. p4 is identically zero for this family.
inline std::array<double, 4> zd_policy(double chi, double phi) {
  if (!zd_feasible(chi, phi))
    throw ConfigError("zd_policy: parameters outside the feasible region");
  std::array<double, 4> p{};
  p[0] = 1.0 - phi * (chi - 1.0);        // (R-P)/(P-S) = 1
  p[1] = 1.0 - phi * (1.0 + 2.0 * chi);  // (T-P)/(P-S) = 2
  p[2] = phi * (chi + 2.0);
  p[3] = 0.0;
  return p;
}

struct ZdFit {
  double chi = 1.0;
  double phi = 0.0;
  double loss = 0.0;
};

namespace detail {

inline double zd_loss(double chi, double phi, std::span<const double> probs) {
  const auto p = zd_policy(chi, phi);
  double loss = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = probs[i] - p[i];
    loss += d * d;
  }
  return loss;
}

}  // namespace detail

// Least-squares fit of (chi, phi) to the four conditioned cooperation
// probabilities: coarse 64x64 grid over chi in [1, 10] and phi over its
// feasible interval, then coordinate descent with shrinking steps.
inline ZdFit fit_zd(std::span<const double> probs) {
  if (probs.size() != 4) throw UsageError("fit_zd: expected 4 probabilities");
  constexpr int kGrid = 64;
  ZdFit best;
  best.loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double chi = 1.0 + 9.0 * i / (kGrid - 1);
    const double phimax = zd_phi_max(chi);
    for (int j = 1; j <= kGrid; ++j) {
      const double phi = phimax * j / kGrid;
      const double loss = detail::zd_loss(chi, phi, probs);
      if (loss < best.loss) best = {chi, phi, loss};
    }
  }
  double step_chi = 9.0 / kGrid;
  double step_phi = best.phi * 0.5 + 1e-3;
  for (int round = 0; round < 60; ++round) {
    bool improved = false;
    for (int sign : {-1, 1}) {
      const double chi = best.chi + sign * step_chi;
      if (chi >= 1.0 && best.phi <= zd_phi_max(chi)) {
        const double loss = detail::zd_loss(chi, best.phi, probs);
        if (loss < best.loss) {
          best.chi = chi;
          best.loss = loss;
          improved = true;
        }
      }
      const double phi = best.phi + sign * step_phi;
      if (phi > 0.0 && phi <= zd_phi_max(best.chi)) {
        const double loss = detail::zd_loss(best.chi, phi, probs);
        if (loss < best.loss) {
          best.phi = phi;
          best.loss = loss;
          improved = true;
        }
      }
    }
    if (!improved) {
      step_chi *= 0.5;
      step_phi *= 0.5;
      if (step_chi < 1e-12 && step_phi < 1e-12) break;
    }
  }
  return best;
}

// One projected ascent step on the probability simplex [0,1]^5:
// element-wise clip of probs + eta * grad.
inline std::array<double, 5> projected_ascent_step(
    std::span<const double> probs, std::span<const double> grad, double eta) {
  if (probs.size() != 5 || grad.size() != 5)
    throw UsageError("projected_ascent_step: expected 5-vectors");
  std::array<double, 5> out{};
  for (int i = 0; i < 5; ++i)
    out[i] = std::clamp(probs[i] + eta * grad[i], 0.0, 1.0);
  return out;
}

}  // namespace coala::analytic

#endif  // COALA_ANALYTIC_ZD_HPP_
