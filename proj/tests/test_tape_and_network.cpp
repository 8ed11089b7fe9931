#include <cmath>
#include <vector>

#include "coala/autodiff/dual.hpp"
#include "coala/autodiff/tape.hpp"
#include "coala/net/network.hpp"
#include "coala/util/rng.hpp"
#include "doctest.h"

using namespace coala;
using namespace coala::autodiff;
using namespace coala::net;

using DMat = Tape<double>::Mat;

TEST_CASE("tape: sum of params gives all-ones gradient; untouched leaf zero") {
  Tape<double> tape;
  DMat a(2, 3), b(1, 4);
  a.setRandom();
  b.setRandom();
  auto la = tape.leaf(a);
  auto lb = tape.leaf(b);
  auto loss = tape.reduce_sum(la);
  tape.backward(loss);
  auto ga = tape.gradient(la);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(ga(r, c) == 1.0);
  auto gb = tape.gradient(lb);
  CHECK(gb.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tape: reuse after backward fails") {
  Tape<double> tape;
  DMat a(1, 1);
  a(0, 0) = 2.0;
  auto la = tape.leaf(a);
  auto loss = tape.reduce_sum(la);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), UsageError);
  CHECK_THROWS_AS(tape.sigmoid(la), UsageError);
}

TEST_CASE("tape: composite ops agree with finite differences") {
  Rng rng(7);
  const int in = 3, mid = 4;
  std::vector<double> theta(in * mid + mid);
  for (auto& v : theta) v = rng.uniform(-1.0, 1.0);
  DMat x(2, in), wsum(2, mid);
  x.setRandom();
  wsum.setRandom();

  auto eval = [&](std::span<const double> t) {
    Tape<double> tape;
    DMat w(in, mid), bias(1, mid);
    for (int r = 0; r < in; ++r)
      for (int c = 0; c < mid; ++c) w(r, c) = t[r * mid + c];
    for (int c = 0; c < mid; ++c) bias(0, c) = t[in * mid + c];
    auto lw = tape.leaf(w);
    auto lb = tape.leaf(bias);
    auto lx = tape.constant(x);
    auto lin = tape.linear(lx, lw, lb);
    auto sig = tape.sigmoid(lin);
    auto tanh_node = tape.tanh(lin);
    auto prod = tape.mul(sig, tape.one_minus(tanh_node));
    auto gain = tape.constant(DMat::Ones(1, mid));
    auto normed = tape.rms_norm(prod, gain);
    auto loss = tape.weighted_sum(normed, wsum);
    return std::tuple{std::move(tape), lw, lb, loss};
  };

  auto [tape, lw, lb, loss] = eval(theta);
  const double loss_value = tape.value(loss)(0, 0);
  CHECK(std::isfinite(loss_value));
  tape.backward(loss);
  std::vector<double> analytic;
  auto gw = tape.gradient(lw);
  for (int r = 0; r < in; ++r)
    for (int c = 0; c < mid; ++c) analytic.push_back(gw(r, c));
  auto gb = tape.gradient(lb);
  for (int c = 0; c < mid; ++c) analytic.push_back(gb(0, c));

  auto f = [&](std::span<const double> t) {
    auto [tp, a_, b_, l_] = eval(t);
    return tp.value(l_)(0, 0);
  };
  const double err = gradcheck_against(analytic, f, theta, 1e-6);
  CHECK(err < 1e-7);
}

TEST_CASE("network init: uniform policy, zero value, seeded determinism") {
  NetConfig cfg;
  cfg.obs_dim = 5;
  cfg.action_dim = 3;
  Rng rng(11);
  auto params = init_params<float>(rng, cfg);
  auto state = HiddenStateT<float>::zero(4, cfg);
  NetParamsT<float>::Mat obs(4, 5);
  obs.setRandom();
  auto out = step_forward(params, obs, state, {0, 0, 0, 0});
  CHECK(out.logits.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(out.values.cwiseAbs().maxCoeff() == 0.0f);

  Rng r1(42), r2(42);
  auto p1 = init_params<float>(r1, cfg);
  auto p2 = init_params<float>(r2, cfg);
  CHECK(p1.flat == p2.flat);
}

namespace {

std::vector<NetParamsT<double>::Mat> random_obs_seq(Rng& rng, int steps,
                                                    int batch, int dim) {
  std::vector<NetParamsT<double>::Mat> seq;
  for (int l = 0; l < steps; ++l) {
    NetParamsT<double>::Mat obs(batch, dim);
    for (Eigen::Index r = 0; r < batch; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) obs(r, c) = rng.uniform(-1.0, 1.0);
    seq.push_back(std::move(obs));
  }
  return seq;
}

NetParamsT<double> perturbed_net(Rng& rng, const NetConfig& cfg) {
  // Random readouts so outputs actually depend on everything.
  auto params = init_params<double>(rng, cfg);
  for (int p : {kPolicyW, kPolicyB, kValueW, kValueB}) {
    auto m = params.view(p);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = 0.5 * rng.normal();
  }
  return params;
}

}  // namespace

TEST_CASE("policy_forward: resets isolate episodes; causality holds") {
  NetConfig cfg;
  cfg.obs_dim = 4;
  cfg.action_dim = 2;
  Rng rng(13);
  auto params = perturbed_net(rng, cfg);
  const int batch = 3, steps = 6;
  auto obs = random_obs_seq(rng, steps, batch, cfg.obs_dim);
  // Naive context: reset at l = 0 and l = 3 (episode length 3).
  std::vector<std::vector<std::uint8_t>> resets(
      steps, std::vector<std::uint8_t>(batch, 0));
  resets[0].assign(batch, 1);
  resets[3].assign(batch, 1);
  auto base = policy_forward(params, obs, resets);

  // Full reset mask: every step equals a single-step forward from zero.
  {
    std::vector<std::vector<std::uint8_t>> all(steps,
                                               std::vector<std::uint8_t>(batch, 1));
    auto stepwise = policy_forward(params, obs, all);
    for (int l = 0; l < steps; ++l) {
      auto state = HiddenStateT<double>::zero(batch, cfg);
      auto single = step_forward(params, obs[l], state,
                                 std::vector<std::uint8_t>(batch, 0));
      CHECK((stepwise.logits[l] - single.logits).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  // Meta context (reset only at 0) agrees with naive context on episode 1.
  {
    std::vector<std::vector<std::uint8_t>> meta(
        steps, std::vector<std::uint8_t>(batch, 0));
    meta[0].assign(batch, 1);
    auto long_ctx = policy_forward(params, obs, meta);
    for (int l = 0; l < 3; ++l)
      CHECK((long_ctx.logits[l] - base.logits[l]).cwiseAbs().maxCoeff() <
            1e-12);
  }

  // Perturbing an observation before the reset leaves post-reset outputs
  // unchanged in the naive context.
  {
    auto perturbed = obs;
    perturbed[1](0, 0) += 0.37;
    perturbed[2](2, 1) -= 0.21;
    auto moved = policy_forward(params, perturbed, resets);
    for (int l = 3; l < steps; ++l) {
      CHECK((moved.logits[l] - base.logits[l]).cwiseAbs().maxCoeff() == 0.0);
      CHECK((moved.values[l] - base.values[l]).cwiseAbs().maxCoeff() == 0.0);
    }
    // And changing input at step l never changes outputs before l.
    for (int l = 0; l < 1; ++l)
      CHECK((moved.logits[0] - base.logits[0]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("taped forward reproduces the plain forward exactly") {
  NetConfig cfg;
  cfg.obs_dim = 5;
  cfg.action_dim = 3;
  Rng rng(17);
  auto params = perturbed_net(rng, cfg);
  const int batch = 2, steps = 5;
  auto obs = random_obs_seq(rng, steps, batch, cfg.obs_dim);
  std::vector<std::vector<std::uint8_t>> resets(
      steps, std::vector<std::uint8_t>(batch, 0));
  resets[0].assign(batch, 1);
  resets[2] = {1, 0};

  auto plain = policy_forward(params, obs, resets);
  TapedSequence<double> rec;
  record_sequence(rec, params, obs, resets);
  for (int l = 0; l < steps; ++l) {
    CHECK((rec.tape.value(rec.logits_nodes[l]) - plain.logits[l])
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((rec.tape.value(rec.value_nodes[l]) - plain.values[l])
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("BPTT gradient matches finite differences on a 4-step sequence") {
  NetConfig cfg;
  cfg.obs_dim = 3;
  cfg.action_dim = 2;
  cfg.width = 8;
  cfg.ff_width = 8;
  Rng rng(19);
  auto params = perturbed_net(rng, cfg);
  const int batch = 2, steps = 4;
  auto obs = random_obs_seq(rng, steps, batch, cfg.obs_dim);
  std::vector<std::vector<std::uint8_t>> resets(
      steps, std::vector<std::uint8_t>(batch, 0));
  resets[0].assign(batch, 1);
  resets[2] = {1, 0};
  std::vector<std::vector<int>> actions(steps, std::vector<int>(batch));
  for (auto& row : actions)
    for (auto& a : row) a = static_cast<int>(rng.below(cfg.action_dim));
  // Random per-step weights on log-probs and values.
  std::vector<NetParamsT<double>::Mat> wl, wv;
  for (int l = 0; l < steps; ++l) {
    NetParamsT<double>::Mat a(batch, 1), b(batch, 1);
    for (int r = 0; r < batch; ++r) {
      a(r, 0) = rng.uniform(-1.0, 1.0);
      b(r, 0) = rng.uniform(-1.0, 1.0);
    }
    wl.push_back(a);
    wv.push_back(b);
  }

  auto loss_of = [&](const NetParamsT<double>& p) {
    auto out = policy_forward(p, obs, resets);
    double loss = 0.0;
    for (int l = 0; l < steps; ++l)
      for (int b = 0; b < batch; ++b) {
        loss += wl[l](b, 0) * log_prob_of(out.logits[l].row(b), actions[l][b]);
        loss += wv[l](b, 0) * out.values[l](b, 0);
      }
    return loss;
  };

  TapedSequence<double> rec;
  record_sequence(rec, params, obs, resets);
  for (int l = 0; l < steps; ++l) {
    auto logp = rec.tape.log_softmax_gather(rec.logits_nodes[l], actions[l]);
    rec.tape.accumulate_adjoint(logp, wl[l]);
    rec.tape.accumulate_adjoint(rec.value_nodes[l], wv[l]);
  }
  rec.tape.run_backward();
  auto grad = collect_gradient(rec, params);

  // Central differences over every parameter, double precision.
  NetParamsT<double> probe = params;
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < probe.flat.size(); ++i) {
    const double orig = probe.flat[i];
    probe.flat[i] = orig + h;
    const double fp = loss_of(probe);
    probe.flat[i] = orig - h;
    const double fm = loss_of(probe);
    probe.flat[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(grad[i] - numeric) /
                                std::max(1.0, std::abs(numeric)));
  }
  CHECK(worst < 1e-4);

  // Zero loss weights give zero gradients.
  TapedSequence<double> rec0;
  record_sequence(rec0, params, obs, resets);
  rec0.tape.run_backward();
  auto grad0 = collect_gradient(rec0, params);
  for (double g : grad0) CHECK(g == 0.0);
}

TEST_CASE("BPTT: observations before a reset do not affect post-reset losses") {
  NetConfig cfg;
  cfg.obs_dim = 3;
  cfg.action_dim = 2;
  Rng rng(23);
  auto params = perturbed_net(rng, cfg);
  const int batch = 1, steps = 4;
  auto obs = random_obs_seq(rng, steps, batch, cfg.obs_dim);
  std::vector<std::vector<std::uint8_t>> resets(
      steps, std::vector<std::uint8_t>(batch, 0));
  resets[0] = {1};
  resets[2] = {1};

  // Loss only on post-reset steps (2, 3); finite difference w.r.t. an
  // observation at step 1 must be exactly zero.
  auto loss_of = [&](const std::vector<NetParamsT<double>::Mat>& o) {
    auto out = policy_forward(params, o, resets);
    return out.values[2](0, 0) + out.values[3](0, 0) +
           log_prob_of(out.logits[3].row(0), 1);
  };
  const double base = loss_of(obs);
  auto moved = obs;
  moved[1](0, 2) += 0.5;
  CHECK(loss_of(moved) == base);
}

TEST_CASE("sample_action statistics and normalization") {
  Rng rng(29);
  std::vector<float> extreme{50.0f, -50.0f};
  int zero_count = 0;
  for (int i = 0; i < 10000; ++i)
    if (sample_action(extreme, rng).action == 0) ++zero_count;
  CHECK(zero_count > 9990);

  std::vector<float> uniform{0.3f, 0.3f};
  int first = 0;
  for (int i = 0; i < 10000; ++i)
    if (sample_action(uniform, rng).action == 0) ++first;
  CHECK(std::abs(first / 10000.0 - 0.5) < 0.02);

  std::vector<float> logits{0.2f, -1.0f, 0.7f};
  double total = 0.0;
  for (int a = 0; a < 3; ++a) total += std::exp(log_prob_of(logits, a));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}
