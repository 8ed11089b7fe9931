#ifndef COALA_NET_NETWORK_HPP_
#define COALA_NET_NETWORK_HPP_

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "coala/autodiff/tape.hpp"
#include "coala/util/errors.hpp"
#include "coala/util/rng.hpp"

namespace coala::net {

struct NetConfig {
  int obs_dim = 0;
  int action_dim = 0;
  int width = 32;     // recurrent state width
  int ff_width = 32;  // feedforward hidden width
  double decay_gate_bias = 3.0;  // sigmoid(3) ~ 0.95: long memory at init

  bool operator==(const NetConfig&) const = default;
};

// Parameter tensors in storage order. The policy/value readouts are
// initialized to zero so the initial policy is uniform and values are zero.
enum ParamName : int {
  kEmbedW = 0,
  kEmbedB,
  kDecayW,
  kDecayB,
  kInputW,
  kInputB,
  kUpdateW,
  kUpdateB,
  kNormGain,
  kFf1W,
  kFf1B,
  kFf2W,
  kFf2B,
  kPolicyW,
  kPolicyB,
  kValueW,
  kValueB,
  kNumParams,
};

inline const char* param_name(int p) {
  static constexpr const char* kNames[kNumParams] = {
      "embed_w",  "embed_b",  "decay_w", "decay_b", "input_w", "input_b",
      "update_w", "update_b", "norm_gain", "ff1_w",   "ff1_b",   "ff2_w",
      "ff2_b",    "policy_w", "policy_b",  "value_w", "value_b"};
  return kNames[p];
}

inline std::array<std::pair<int, int>, kNumParams> param_shapes(
    const NetConfig& cfg) {
  const int d = cfg.obs_dim, w = cfg.width, f = cfg.ff_width,
            a = cfg.action_dim;
  return {{{d, w}, {1, w}, {w, w}, {1, w}, {w, w}, {1, w}, {w, w}, {1, w},
           {1, w}, {w, f}, {1, f}, {f, w}, {1, w}, {w, a}, {1, a}, {w, 1},
           {1, 1}}};
}

// Flat parameter vector with named matrix views.
template <class S>
struct NetParamsT {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  NetConfig cfg;
  std::vector<S> flat;
  std::array<std::size_t, kNumParams + 1> offsets{};

  Eigen::Map<Mat> view(int p) {
    const auto shape = param_shapes(cfg)[p];
    return Eigen::Map<Mat>(flat.data() + offsets[p], shape.first, shape.second);
  }
  Eigen::Map<const Mat> view(int p) const {
    const auto shape = param_shapes(cfg)[p];
    return Eigen::Map<const Mat>(flat.data() + offsets[p], shape.first,
                                 shape.second);
  }
};

using NetParams = NetParamsT<float>;

template <class S>
NetParamsT<S> zero_params(const NetConfig& cfg) {
  if (cfg.obs_dim < 1 || cfg.action_dim < 1 || cfg.width < 1 ||
      cfg.ff_width < 1)
    throw ConfigError("NetConfig: dimensions must be positive");
  NetParamsT<S> params;
  params.cfg = cfg;
  const auto shapes = param_shapes(cfg);
  std::size_t offset = 0;
  for (int p = 0; p < kNumParams; ++p) {
    params.offsets[p] = offset;
    offset += static_cast<std::size_t>(shapes[p].first) * shapes[p].second;
  }
  params.offsets[kNumParams] = offset;
  params.flat.assign(offset, S(0));
  return params;
}

// Weights ~ N(0, 1/fan_in); biases zero except the decay gate (long-memory
// bias); norm gain one; both readouts exactly zero.
template <class S = float>
NetParamsT<S> init_params(Rng& rng, const NetConfig& cfg) {
  NetParamsT<S> params = zero_params<S>(cfg);
  const auto shapes = param_shapes(cfg);
  for (int p : {kEmbedW, kDecayW, kInputW, kUpdateW, kFf1W, kFf2W}) {
    auto m = params.view(p);
    const double scale = 1.0 / std::sqrt(static_cast<double>(shapes[p].first));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = static_cast<S>(scale * rng.normal());
  }
  params.view(kDecayB).setConstant(static_cast<S>(cfg.decay_gate_bias));
  params.view(kNormGain).setOnes();
  return params;
}

// Per-trajectory recurrent state, zeroed at trajectory start and wherever
// the reset mask marks an inner-episode boundary.
template <class S>
struct HiddenStateT {
  using Mat = typename NetParamsT<S>::Mat;
  Mat h;  // [B x width]

  static HiddenStateT zero(int batch, const NetConfig& cfg) {
    HiddenStateT s;
    s.h = Mat::Zero(batch, cfg.width);
    return s;
  }
};

using HiddenState = HiddenStateT<float>;

template <class S>
struct StepOutput {
  using Mat = typename NetParamsT<S>::Mat;
  Mat logits;  // [B x A]
  Mat values;  // [B x 1]
};

namespace detail {

template <class M>
void sigmoid_inplace(M& m) {
  m = m.unaryExpr([](auto v) {
    using T = decltype(v);
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                     : std::exp(v) / (T(1) + std::exp(v));
  });
}

}  // namespace detail

// One forward step without recording: used for rollouts. Rows of the
// hidden state whose reset flag is set are zeroed before processing.
template <class S>
StepOutput<S> step_forward(const NetParamsT<S>& params,
                           const typename NetParamsT<S>::Mat& obs,
                           HiddenStateT<S>& state,
                           const std::vector<std::uint8_t>& reset) {
  using Mat = typename NetParamsT<S>::Mat;
  const NetConfig& cfg = params.cfg;
  if (obs.cols() != cfg.obs_dim) throw UsageError("step_forward: obs shape");
  if (state.h.rows() != obs.rows()) throw UsageError("step_forward: batch mismatch");
  if (static_cast<Eigen::Index>(reset.size()) != obs.rows())
    throw UsageError("step_forward: reset mask size");

  for (Eigen::Index b = 0; b < obs.rows(); ++b)
    if (reset[b]) state.h.row(b).setZero();

  Mat x = obs * params.view(kEmbedW);
  x.rowwise() += params.view(kEmbedB).row(0);

  Mat decay = x * params.view(kDecayW);
  decay.rowwise() += params.view(kDecayB).row(0);
  detail::sigmoid_inplace(decay);
  Mat input_gate = x * params.view(kInputW);
  input_gate.rowwise() += params.view(kInputB).row(0);
  detail::sigmoid_inplace(input_gate);
  Mat update = x * params.view(kUpdateW);
  update.rowwise() += params.view(kUpdateB).row(0);

  state.h = decay.cwiseProduct(state.h) +
            (Mat::Ones(decay.rows(), decay.cols()) - decay)
                .cwiseProduct(input_gate.cwiseProduct(update));

  // RMS norm + feedforward with a residual connection back to the embedding.
  Mat normed(state.h.rows(), state.h.cols());
  const auto width = static_cast<S>(state.h.cols());
  for (Eigen::Index b = 0; b < state.h.rows(); ++b) {
    const S mean_sq = state.h.row(b).squaredNorm() / width;
    const S inv = S(1) / std::sqrt(mean_sq + S(1e-6));
    normed.row(b) =
        state.h.row(b).cwiseProduct(params.view(kNormGain).row(0)) * inv;
  }
  Mat hidden = normed * params.view(kFf1W);
  hidden.rowwise() += params.view(kFf1B).row(0);
  hidden = hidden.array().tanh().matrix();
  Mat ff = hidden * params.view(kFf2W);
  ff.rowwise() += params.view(kFf2B).row(0);
  Mat y = x + ff;

  StepOutput<S> out;
  out.logits = y * params.view(kPolicyW);
  out.logits.rowwise() += params.view(kPolicyB).row(0);
  out.values = y * params.view(kValueW);
  out.values.rowwise() += params.view(kValueB).row(0);
  return out;
}

template <class S>
struct SequenceOutput {
  std::vector<typename NetParamsT<S>::Mat> logits;  // per step [B x A]
  std::vector<typename NetParamsT<S>::Mat> values;  // per step [B x 1]
  HiddenStateT<S> final_state;
};

// Plain (unrecorded) sequence forward; reset_mask[l][b] zeroes h before
// step l for trajectory b.
template <class S>
SequenceOutput<S> policy_forward(
    const NetParamsT<S>& params,
    const std::vector<typename NetParamsT<S>::Mat>& obs_seq,
    const std::vector<std::vector<std::uint8_t>>& reset_mask) {
  if (obs_seq.size() != reset_mask.size())
    throw UsageError("policy_forward: obs/reset length mismatch");
  if (obs_seq.empty()) throw UsageError("policy_forward: empty sequence");
  SequenceOutput<S> out;
  out.final_state =
      HiddenStateT<S>::zero(static_cast<int>(obs_seq[0].rows()), params.cfg);
  out.logits.reserve(obs_seq.size());
  out.values.reserve(obs_seq.size());
  for (std::size_t l = 0; l < obs_seq.size(); ++l) {
    auto step = step_forward(params, obs_seq[l], out.final_state, reset_mask[l]);
    out.logits.push_back(std::move(step.logits));
    out.values.push_back(std::move(step.values));
  }
  return out;
}

// Recorded sequence forward: parameters become tape leaves so that one
// backward pass yields gradients for the whole unrolled computation.
template <class S>
struct TapedSequence {
  autodiff::Tape<S> tape;
  std::array<typename autodiff::Tape<S>::NodeId, kNumParams> param_nodes{};
  std::vector<typename autodiff::Tape<S>::NodeId> logits_nodes;
  std::vector<typename autodiff::Tape<S>::NodeId> value_nodes;
};

template <class S>
void record_sequence(TapedSequence<S>& rec, const NetParamsT<S>& params,
                     const std::vector<typename NetParamsT<S>::Mat>& obs_seq,
                     const std::vector<std::vector<std::uint8_t>>& reset_mask) {
  using Tape = autodiff::Tape<S>;
  using NodeId = typename Tape::NodeId;
  if (obs_seq.size() != reset_mask.size() || obs_seq.empty())
    throw UsageError("record_sequence: bad sequence");
  Tape& tape = rec.tape;
  for (int p = 0; p < kNumParams; ++p)
    rec.param_nodes[p] = tape.leaf(params.view(p));

  const auto batch = static_cast<int>(obs_seq[0].rows());
  NodeId h = tape.constant(
      NetParamsT<S>::Mat::Zero(batch, params.cfg.width));
  for (std::size_t l = 0; l < obs_seq.size(); ++l) {
    NodeId obs = tape.constant(obs_seq[l]);
    NodeId h_masked = tape.row_zero(h, reset_mask[l]);
    NodeId x = tape.linear(obs, rec.param_nodes[kEmbedW],
                           rec.param_nodes[kEmbedB]);
    NodeId decay = tape.sigmoid(
        tape.linear(x, rec.param_nodes[kDecayW], rec.param_nodes[kDecayB]));
    NodeId input_gate = tape.sigmoid(
        tape.linear(x, rec.param_nodes[kInputW], rec.param_nodes[kInputB]));
    NodeId update =
        tape.linear(x, rec.param_nodes[kUpdateW], rec.param_nodes[kUpdateB]);
    NodeId gated = tape.mul(input_gate, update);
    h = tape.add(tape.mul(decay, h_masked),
                 tape.mul(tape.one_minus(decay), gated));
    NodeId normed = tape.rms_norm(h, rec.param_nodes[kNormGain]);
    NodeId ff = tape.linear(
        tape.tanh(tape.linear(normed, rec.param_nodes[kFf1W],
                              rec.param_nodes[kFf1B])),
        rec.param_nodes[kFf2W], rec.param_nodes[kFf2B]);
    NodeId y = tape.add(x, ff);
    rec.logits_nodes.push_back(
        tape.linear(y, rec.param_nodes[kPolicyW], rec.param_nodes[kPolicyB]));
    rec.value_nodes.push_back(
        tape.linear(y, rec.param_nodes[kValueW], rec.param_nodes[kValueB]));
  }
}

// Collect leaf gradients into a flat vector aligned with NetParamsT::flat.
template <class S>
std::vector<S> collect_gradient(const TapedSequence<S>& rec,
                                const NetParamsT<S>& params) {
  std::vector<S> grad(params.flat.size(), S(0));
  const auto shapes = param_shapes(params.cfg);
  for (int p = 0; p < kNumParams; ++p) {
    auto g = rec.tape.gradient(rec.param_nodes[p]);
    std::size_t off = params.offsets[p];
    for (Eigen::Index r = 0; r < shapes[p].first; ++r)
      for (Eigen::Index c = 0; c < shapes[p].second; ++c)
        grad[off + static_cast<std::size_t>(r) * shapes[p].second + c] =
            g(r, c);
  }
  return grad;
}

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};

// Categorical sample from a row of logits; log_prob matches the softmax.
template <class Row>
SampledAction sample_action(const Row& logits, Rng& rng) {
  const int n = static_cast<int>(logits.size());
  double zmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    zmax = std::max(zmax, static_cast<double>(logits[k]));
  double total = 0.0;
  std::vector<double> weights(n);
  for (int k = 0; k < n; ++k) {
    weights[k] = std::exp(static_cast<double>(logits[k]) - zmax);
    total += weights[k];
  }
  double x = rng.uniform() * total;
  int action = n - 1;
  for (int k = 0; k < n; ++k) {
    x -= weights[k];
    if (x < 0.0) {
      action = k;
      break;
    }
  }
  SampledAction out;
  out.action = action;
  out.log_prob = std::log(weights[action] / total);
  return out;
}

template <class Row>
double log_prob_of(const Row& logits, int action) {
  const int n = static_cast<int>(logits.size());
  double zmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    zmax = std::max(zmax, static_cast<double>(logits[k]));
  double total = 0.0;
  for (int k = 0; k < n; ++k)
    total += std::exp(static_cast<double>(logits[k]) - zmax);
  return static_cast<double>(logits[action]) - zmax - std::log(total);
}

}  // namespace coala::net

#endif  // COALA_NET_NETWORK_HPP_
