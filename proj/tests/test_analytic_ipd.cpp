#include "coala/analytic/ipd.hpp"

#include <cmath>
#include <span>
#include <vector>

#include "coala/autodiff/dual.hpp"
#include "coala/util/rng.hpp"
#include "doctest.h"

using namespace coala;
using namespace coala::analytic;

namespace {

TabularPolicy random_policy(Rng& rng, double scale = 1.0) {
  TabularPolicy p;
  for (auto& l : p.logits) l = scale * rng.normal();
  return p;
}

TabularPolicy constant_policy(double logit) {
  TabularPolicy p;
  p.logits.fill(logit);
  return p;
}

}  // namespace

TEST_CASE("markov_and_s0: deterministic policies") {
  const TabularPolicy all_c = constant_policy(40.0);
  const TabularPolicy all_d = constant_policy(-40.0);

  auto [mc, s0c] = markov_and_s0(all_c, all_c);
  for (int s = 0; s < kStates; ++s) {
    CHECK(mc[0 * kStates + s] == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k < kStates; ++k)
      CHECK(mc[k * kStates + s] == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(s0c[0] == doctest::Approx(1.0).epsilon(1e-12));

  auto [md, s0d] = markov_and_s0(all_d, all_d);
  for (int s = 0; s < kStates; ++s)
    CHECK(md[3 * kStates + s] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s0d[3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("markov columns sum to one for random policies") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const TabularPolicy a = random_policy(rng, 2.0);
    const TabularPolicy b = random_policy(rng, 2.0);
    auto [m, s0] = markov_and_s0(a, b);
    for (int s = 0; s < kStates; ++s) {
      double col = 0.0;
      for (int k = 0; k < kStates; ++k) col += m[k * kStates + s];
      CHECK(std::abs(col - 1.0) < 1e-12);
    }
    double total = 0.0;
    for (double v : s0) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("expected_return: pure strategy corners") {
  const IpdPayoffs pay;
  const TabularPolicy all_c = constant_policy(60.0);
  const TabularPolicy all_d = constant_policy(-60.0);

  auto cc = expected_return(all_c, all_c, pay);
  CHECK(cc.first == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(cc.second == doctest::Approx(20.0).epsilon(1e-9));

  auto dd = expected_return(all_d, all_d, pay);
  CHECK(dd.first == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dd.second == doctest::Approx(0.0).epsilon(1e-9));

  auto dc = expected_return(all_d, all_c, pay);
  CHECK(dc.first == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(dc.second == doctest::Approx(-20.0).epsilon(1e-9));
}

TEST_CASE("expected_return symmetric under agent swap") {
  Rng rng(7);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 200; ++trial) {
    const TabularPolicy a = random_policy(rng, 1.5);
    const TabularPolicy b = random_policy(rng, 1.5);
    auto ab = expected_return(a, b, pay);
    auto ba = expected_return(b, a, pay);
    CHECK(std::abs(ab.first - ba.second) < 1e-10);
    CHECK(std::abs(ab.second - ba.first) < 1e-10);
  }
}

TEST_CASE("returns stay within payoff bounds") {
  Rng rng(11);
  const IpdPayoffs pay;
  const double lo = -1.0 / (1.0 - pay.gamma);
  const double hi = 2.0 / (1.0 - pay.gamma);
  for (int trial = 0; trial < 500; ++trial) {
    const TabularPolicy a = random_policy(rng, 3.0);
    const TabularPolicy b = random_policy(rng, 3.0);
    auto j = expected_return(a, b, pay);
    CHECK(j.first >= lo - 1e-9);
    CHECK(j.first <= hi + 1e-9);
    CHECK(j.second >= lo - 1e-9);
    CHECK(j.second <= hi + 1e-9);
  }
}

TEST_CASE("solve succeeds for many random policies (invertibility)") {
  Rng rng(5);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 10000; ++trial) {
    const TabularPolicy a = random_policy(rng, 4.0);
    const TabularPolicy b = random_policy(rng, 4.0);
    CHECK_NOTHROW(expected_return(a, b, pay));
  }
}

TEST_CASE("partial gradient matches finite differences") {
  Rng rng(21);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 20; ++trial) {
    const TabularPolicy a = random_policy(rng);
    const TabularPolicy b = random_policy(rng);
    auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      std::vector<T> other(kParams);
      for (int i = 0; i < kParams; ++i) other[i] = T(b.logits[i]);
      return own_return(std::span<const T>(xs), std::span<const T>(other), pay);
    };
    CHECK(autodiff::gradcheck(f, std::span<const double>(a.logits), 1e-4) <
          1e-5);
  }
}

TEST_CASE("naive_step: eta 0 is identity; gradient descent direction sane") {
  Rng rng(33);
  const IpdPayoffs pay;
  const TabularPolicy psi = random_policy(rng);
  const TabularPolicy other = random_policy(rng);
  const TabularPolicy same = naive_step(psi, other, pay, 0.0);
  for (int i = 0; i < kParams; ++i)
    CHECK(same.logits[i] == doctest::Approx(psi.logits[i]).epsilon(1e-15));

  // Against an always-defect opponent, cooperating in the DD state only
  // loses reward, so one ascent step cannot raise that probability.
  const TabularPolicy defector = constant_policy(-50.0);
  for (int trial = 0; trial < 50; ++trial) {
    const TabularPolicy start = random_policy(rng, 1.5);
    const TabularPolicy stepped = naive_step(start, defector, pay, 1.0);
    CHECK(stepped.logits[4] <= start.logits[4] + 1e-12);
  }
}

TEST_CASE("naive_step gradient matches finite differences of own return") {
  Rng rng(55);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 10; ++trial) {
    const TabularPolicy psi = random_policy(rng);
    const TabularPolicy other = random_policy(rng);
    auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      std::vector<T> o(kParams);
      for (int i = 0; i < kParams; ++i) o[i] = T(other.logits[i]);
      return own_return(std::span<const T>(xs), std::span<const T>(o), pay);
    };
    CHECK(autodiff::gradcheck(f, std::span<const double>(psi.logits), 1e-4) <
          1e-5);
  }
}

TEST_CASE("shaping_gradient with zero look-ahead equals partial gradient") {
  Rng rng(77);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 20; ++trial) {
    const TabularPolicy meta = random_policy(rng);
    const TabularPolicy naive = random_policy(rng);
    auto shaped = shaping_gradient(meta, naive, pay, 0, 5.0);
    auto partial = partial_gradient(meta, naive, pay);
    for (int i = 0; i < kParams; ++i)
      CHECK(shaped[i] == doctest::Approx(partial[i]).epsilon(1e-12));
  }
}

TEST_CASE("shaping_gradient matches finite differences of unrolled objective") {
  Rng rng(88);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 4; ++trial) {
    const TabularPolicy meta = random_policy(rng);
    const TabularPolicy naive = random_policy(rng);
    auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      std::vector<T> psi0(kParams);
      for (int i = 0; i < kParams; ++i) psi0[i] = T(naive.logits[i]);
      return shaping_objective(std::span<const T>(xs),
                               std::span<const T>(psi0), pay, 3, 1.0);
    };
    CHECK(autodiff::gradcheck(f, std::span<const double>(meta.logits), 1e-4) <
          1e-4);
  }
}

TEST_CASE("lola_dice_gradient: alpha 0 equals partial gradient") {
  Rng rng(99);
  const IpdPayoffs pay;
  const TabularPolicy a = random_policy(rng);
  const TabularPolicy b = random_policy(rng);
  auto lola = lola_dice_gradient(a, b, pay, 2, 0.0);
  auto partial = partial_gradient(a, b, pay);
  for (int i = 0; i < kParams; ++i)
    CHECK(lola[i] == doctest::Approx(partial[i]).epsilon(1e-12));
}

TEST_CASE("lola_dice_gradient matches finite differences, two look-aheads") {
  Rng rng(111);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 4; ++trial) {
    const TabularPolicy a = random_policy(rng);
    const TabularPolicy b = random_policy(rng);
    auto f = [&](auto xs) -> typename std::decay_t<decltype(xs)>::value_type {
      using T = typename std::decay_t<decltype(xs)>::value_type;
      std::vector<T> other(kParams);
      for (int i = 0; i < kParams; ++i) other[i] = T(b.logits[i]);
      return lola_objective(std::span<const T>(xs), std::span<const T>(other),
                            pay, 2, 1.0);
    };
    CHECK(autodiff::gradcheck(f, std::span<const double>(a.logits), 1e-4) <
          1e-4);
  }
}

TEST_CASE("shaping and LOLA gradients agree after removing the m=0 term") {
  // shaping objective at M=1 is J(phi, psi0) + J(phi, psi1); the look-ahead
  // objective is the psi1 term alone, so the gradients differ by exactly the
  // partial gradient when psi0 is the co-player's current parameters.
  Rng rng(131);
  const IpdPayoffs pay;
  for (int trial = 0; trial < 10; ++trial) {
    const TabularPolicy meta = random_policy(rng);
    const TabularPolicy other = random_policy(rng);
    const double eta = 2.0;
    auto shaped = shaping_gradient(meta, other, pay, 1, eta);
    auto lola = lola_dice_gradient(meta, other, pay, 1, eta);
    auto partial = partial_gradient(meta, other, pay);
    for (int i = 0; i < kParams; ++i)
      CHECK(shaped[i] - partial[i] == doctest::Approx(lola[i]).epsilon(1e-9));
  }
}

TEST_CASE("literal co-return naive objective is selectable") {
  Rng rng(141);
  const IpdPayoffs pay;
  const TabularPolicy psi = random_policy(rng);
  const TabularPolicy other = random_policy(rng);
  const TabularPolicy own = naive_step(psi, other, pay, 1.0,
                                       NaiveObjective::own);
  const TabularPolicy lit = naive_step(psi, other, pay, 1.0,
                                       NaiveObjective::coplayer);
  bool any_diff = false;
  for (int i = 0; i < kParams; ++i)
    any_diff = any_diff || std::abs(own.logits[i] - lit.logits[i]) > 1e-9;
  CHECK(any_diff);
}
