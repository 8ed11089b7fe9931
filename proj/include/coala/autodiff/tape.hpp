#ifndef COALA_AUTODIFF_TAPE_HPP_
#define COALA_AUTODIFF_TAPE_HPP_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

#include "coala/util/errors.hpp"

namespace coala::autodiff {

// Reverse-mode tape over dense row-major matrices. Values are recorded on
// matrix-level operations (one node per op, not per scalar) so that long
// recurrent rollouts stay cheap to record and replay. S is float for
// training and double for finite-difference checks.
template <class S>
class Tape {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using NodeId = std::int32_t;

  // --- recording -----------------------------------------------------------

  NodeId leaf(const Mat& value) { return push(Op::leaf, value); }
  NodeId constant(const Mat& value) { return push(Op::constant, value); }

  // x[Bxin] * w[inxout] + bias[1xout] broadcast over rows. bias < 0 omits it.
  NodeId linear(NodeId x, NodeId w, NodeId bias = -1) {
    const Mat& xv = value(x);
    const Mat& wv = value(w);
    if (xv.cols() != wv.rows()) throw UsageError("tape linear: shape mismatch");
    Mat out = xv * wv;
    if (bias >= 0) {
      const Mat& bv = value(bias);
      if (bv.rows() != 1 || bv.cols() != out.cols())
        throw UsageError("tape linear: bias shape mismatch");
      out.rowwise() += bv.row(0);
    }
    return push(Op::linear, std::move(out), x, w, bias);
  }

  NodeId sigmoid(NodeId x) {
    Mat out = value(x).unaryExpr([](S v) {
      return v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                       : std::exp(v) / (S(1) + std::exp(v));
    });
    return push(Op::sigmoid, std::move(out), x);
  }

  NodeId tanh(NodeId x) {
    Mat out = value(x).array().tanh().matrix();
    return push(Op::tanh, std::move(out), x);
  }

  NodeId add(NodeId a, NodeId b) {
    check_same_shape(a, b, "add");
    Mat out = value(a) + value(b);
    return push(Op::add, std::move(out), a, b);
  }

  NodeId sub(NodeId a, NodeId b) {
    check_same_shape(a, b, "sub");
    Mat out = value(a) - value(b);
    return push(Op::sub, std::move(out), a, b);
  }

  NodeId mul(NodeId a, NodeId b) {
    check_same_shape(a, b, "mul");
    Mat out = value(a).cwiseProduct(value(b));
    return push(Op::mul, std::move(out), a, b);
  }

  NodeId one_minus(NodeId x) {
    Mat out = (S(1) - value(x).array()).matrix();
    return push(Op::one_minus, std::move(out), x);
  }

  // Zero out rows b where mask[b] != 0 (hidden-state resets).
  NodeId row_zero(NodeId x, std::vector<std::uint8_t> mask) {
    const Mat& xv = value(x);
    if (static_cast<Eigen::Index>(mask.size()) != xv.rows())
      throw UsageError("tape row_zero: mask size mismatch");
    Mat out = xv;
    for (Eigen::Index b = 0; b < out.rows(); ++b)
      if (mask[b]) out.row(b).setZero();
    const int aux = static_cast<int>(masks_.size());
    masks_.push_back(std::move(mask));
    return push(Op::row_zero, std::move(out), x, -1, -1, aux);
  }

  // Row-wise RMS normalization with a learned gain: x / sqrt(mean(x^2)+eps) * gain.
  NodeId rms_norm(NodeId x, NodeId gain) {
    const Mat& xv = value(x);
    const Mat& gv = value(gain);
    if (gv.rows() != 1 || gv.cols() != xv.cols())
      throw UsageError("tape rms_norm: gain shape mismatch");
    Mat out(xv.rows(), xv.cols());
    for (Eigen::Index b = 0; b < xv.rows(); ++b) {
      const S mean_sq = xv.row(b).squaredNorm() / static_cast<S>(xv.cols());
      const S inv = S(1) / std::sqrt(mean_sq + kRmsEps);
      out.row(b) = xv.row(b).cwiseProduct(gv.row(0)) * inv;
    }
    return push(Op::rms_norm, std::move(out), x, gain);
  }

  // Log-probability of the taken action per row: logits[BxA] -> [Bx1].
  NodeId log_softmax_gather(NodeId logits, std::vector<int> actions) {
    const Mat& z = value(logits);
    if (static_cast<Eigen::Index>(actions.size()) != z.rows())
      throw UsageError("tape log_softmax_gather: action count mismatch");
    Mat out(z.rows(), 1);
    for (Eigen::Index b = 0; b < z.rows(); ++b) {
      const int a = actions[b];
      if (a < 0 || a >= z.cols())
        throw UsageError("tape log_softmax_gather: action out of range");
      const S zmax = z.row(b).maxCoeff();
      S total = S(0);
      for (Eigen::Index k = 0; k < z.cols(); ++k)
        total += std::exp(z(b, k) - zmax);
      out(b, 0) = z(b, a) - zmax - std::log(total);
    }
    const int aux = static_cast<int>(actions_.size());
    actions_.push_back(std::move(actions));
    return push(Op::log_softmax_gather, std::move(out), logits, -1, -1, aux);
  }

  // Full reduction to a 1x1 scalar node.
  NodeId reduce_sum(NodeId x) {
    Mat out(1, 1);
    out(0, 0) = value(x).sum();
    return push(Op::reduce_sum, std::move(out), x);
  }

  // sum(x .* weights) as a 1x1 node; weights are a constant matrix.
  NodeId weighted_sum(NodeId x, const Mat& weights) {
    const Mat& xv = value(x);
    if (weights.rows() != xv.rows() || weights.cols() != xv.cols())
      throw UsageError("tape weighted_sum: shape mismatch");
    Mat out(1, 1);
    out(0, 0) = xv.cwiseProduct(weights).sum();
    const int aux = static_cast<int>(weight_mats_.size());
    weight_mats_.push_back(weights);
    return push(Op::weighted_sum, std::move(out), x, -1, -1, aux);
  }

  // --- inspection ----------------------------------------------------------

  const Mat& value(NodeId id) const { return nodes_[check_id(id)].value; }
  std::size_t size() const { return nodes_.size(); }

  // --- backward ------------------------------------------------------------

  // Add a seed adjoint to a node before run_backward (training losses
  // inject per-step dL/dlogp and dL/dvalue this way).
  void accumulate_adjoint(NodeId id, const Mat& seed) {
    Node& n = nodes_[check_id(id)];
    if (seed.rows() != n.value.rows() || seed.cols() != n.value.cols())
      throw UsageError("tape accumulate_adjoint: shape mismatch");
    ensure_adjoint(n);
    n.adjoint += seed;
  }

  // Backward from a scalar (1x1) node, seeding with 1.
  void backward(NodeId root) {
    const Node& n = nodes_[check_id(root)];
    if (n.value.rows() != 1 || n.value.cols() != 1)
      throw UsageError("tape backward: root must be 1x1");
    Mat seed(1, 1);
    seed(0, 0) = S(1);
    accumulate_adjoint(root, seed);
    run_backward();
  }

  // Propagate all accumulated seeds to the leaves. Single use per tape.
  void run_backward() {
    if (consumed_) throw UsageError("tape reuse after backward");
    consumed_ = true;
    for (std::int32_t id = static_cast<std::int32_t>(nodes_.size()) - 1;
         id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.adjoint.size() == 0) continue;  // untouched subgraph
      backprop_node(n);
    }
  }

  // Gradient of a leaf after backward; zero matrix if the leaf was never
  // touched by the loss.
  Mat gradient(NodeId id) const {
    const Node& n = nodes_[check_id(id)];
    if (n.adjoint.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.adjoint;
  }

 private:
  static constexpr S kRmsEps = S(1e-6);

  enum class Op : std::uint8_t {
    leaf,
    constant,
    linear,
    sigmoid,
    tanh,
    add,
    sub,
    mul,
    one_minus,
    row_zero,
    rms_norm,
    log_softmax_gather,
    reduce_sum,
    weighted_sum,
  };

  struct Node {
    Op op;
    NodeId a = -1, b = -1, c = -1;
    int aux = -1;
    Mat value;
    Mat adjoint;
  };

  NodeId push(Op op, Mat value, NodeId a = -1, NodeId b = -1, NodeId c = -1,
              int aux = -1) {
    if (consumed_) throw UsageError("tape reuse after backward");
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.aux = aux;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId check_id(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
      throw UsageError("tape: bad node id");
    return id;
  }

  void check_same_shape(NodeId a, NodeId b, const char* what) const {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
      throw UsageError(std::string("tape ") + what + ": shape mismatch");
  }

  void ensure_adjoint(Node& n) {
    if (n.adjoint.size() == 0)
      n.adjoint = Mat::Zero(n.value.rows(), n.value.cols());
  }

  Mat& adj(NodeId id) {
    Node& n = nodes_[id];
    ensure_adjoint(n);
    return n.adjoint;
  }

  void backprop_node(Node& n) {
    const Mat& dy = n.adjoint;
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        return;
      case Op::linear: {
        const Mat& x = nodes_[n.a].value;
        const Mat& w = nodes_[n.b].value;
        adj(n.a).noalias() += dy * w.transpose();
        adj(n.b).noalias() += x.transpose() * dy;
        if (n.c >= 0) adj(n.c).row(0) += dy.colwise().sum();
        return;
      }
      case Op::sigmoid: {
        adj(n.a).array() +=
            dy.array() * n.value.array() * (S(1) - n.value.array());
        return;
      }
      case Op::tanh: {
        adj(n.a).array() +=
            dy.array() * (S(1) - n.value.array() * n.value.array());
        return;
      }
      case Op::add:
        adj(n.a) += dy;
        adj(n.b) += dy;
        return;
      case Op::sub:
        adj(n.a) += dy;
        adj(n.b) -= dy;
        return;
      case Op::mul:
        adj(n.a).array() += dy.array() * nodes_[n.b].value.array();
        adj(n.b).array() += dy.array() * nodes_[n.a].value.array();
        return;
      case Op::one_minus:
        adj(n.a) -= dy;
        return;
      case Op::row_zero: {
        Mat masked = dy;
        const auto& mask = masks_[n.aux];
        for (Eigen::Index b = 0; b < masked.rows(); ++b)
          if (mask[b]) masked.row(b).setZero();
        adj(n.a) += masked;
        return;
      }
      case Op::rms_norm: {
        const Mat& x = nodes_[n.a].value;
        const Mat& g = nodes_[n.b].value;
        Mat& dx = adj(n.a);
        Mat& dg = adj(n.b);
        const auto width = static_cast<S>(x.cols());
        for (Eigen::Index b = 0; b < x.rows(); ++b) {
          const S mean_sq = x.row(b).squaredNorm() / width;
          const S inv = S(1) / std::sqrt(mean_sq + kRmsEps);
          // dg_j += dy_j * x_j * inv
          dg.row(0) += dy.row(b).cwiseProduct(x.row(b)) * inv;
          // dx_k = inv * dy_k g_k - inv^3 x_k / d * sum_j dy_j g_j x_j
          const S weighted =
              dy.row(b).cwiseProduct(g.row(0)).cwiseProduct(x.row(b)).sum();
          dx.row(b) += dy.row(b).cwiseProduct(g.row(0)) * inv -
                       x.row(b) * (inv * inv * inv * weighted / width);
        }
        return;
      }
      case Op::log_softmax_gather: {
        const Mat& z = nodes_[n.a].value;
        Mat& dz = adj(n.a);
        const auto& actions = actions_[n.aux];
        for (Eigen::Index b = 0; b < z.rows(); ++b) {
          const S g = dy(b, 0);
          if (g == S(0)) continue;
          const S zmax = z.row(b).maxCoeff();
          S total = S(0);
          for (Eigen::Index k = 0; k < z.cols(); ++k)
            total += std::exp(z(b, k) - zmax);
          for (Eigen::Index k = 0; k < z.cols(); ++k) {
            const S p = std::exp(z(b, k) - zmax) / total;
            dz(b, k) += g * ((k == actions[b] ? S(1) : S(0)) - p);
          }
        }
        return;
      }
      case Op::reduce_sum: {
        adj(n.a).array() += dy(0, 0);
        return;
      }
      case Op::weighted_sum: {
        adj(n.a) += weight_mats_[n.aux] * dy(0, 0);
        return;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<std::uint8_t>> masks_;
  std::vector<std::vector<int>> actions_;
  std::vector<Mat> weight_mats_;
  bool consumed_ = false;
};

}  // namespace coala::autodiff

#endif  // COALA_AUTODIFF_TAPE_HPP_
