#ifndef COALA_TRAINING_OPTIM_HPP_
#define COALA_TRAINING_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coala/util/errors.hpp"

namespace coala::training {

enum class OptimizerKind { sgd, adam, adamw };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;  // adamw only, decoupled
};

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adamw") return OptimizerKind::adamw;
  throw ConfigError("unknown optimizer: " + s);
}

// First/second moment state for Adam-family updates over a flat parameter
// vector. SGD ignores the moments.
template <class S>
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, std::size_t dim)
      : cfg_(cfg), m_(dim, S(0)), v_(dim, S(0)) {}

  const OptimizerConfig& config() const { return cfg_; }

  // Descent step: params -= update(grad). Pass the negated gradient to
  // ascend.
  void step(std::span<S> params, std::span<const S> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw UsageError("Optimizer::step: size mismatch");
    switch (cfg_.kind) {
      case OptimizerKind::sgd:
        for (std::size_t i = 0; i < params.size(); ++i)
          params[i] -= static_cast<S>(cfg_.learning_rate) * grad[i];
        return;
      case OptimizerKind::adam:
      case OptimizerKind::adamw: {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
          const double g = static_cast<double>(grad[i]);
          m_[i] = static_cast<S>(cfg_.beta1 * static_cast<double>(m_[i]) +
                                 (1.0 - cfg_.beta1) * g);
          v_[i] = static_cast<S>(cfg_.beta2 * static_cast<double>(v_[i]) +
                                 (1.0 - cfg_.beta2) * g * g);
          const double mhat = static_cast<double>(m_[i]) / bc1;
          const double vhat = static_cast<double>(v_[i]) / bc2;
          double update = mhat / (std::sqrt(vhat) + cfg_.epsilon);
          if (cfg_.kind == OptimizerKind::adamw)
            update += cfg_.weight_decay * static_cast<double>(params[i]);
          params[i] -= static_cast<S>(cfg_.learning_rate * update);
        }
        return;
      }
    }
  }

 private:
  OptimizerConfig cfg_{};
  std::vector<S> m_;
  std::vector<S> v_;
  long t_ = 0;
};

// Scale gradient in place so its global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <class S>
double clip_global_norm(std::span<S> grad, double max_norm) {
  double sq = 0.0;
  for (const S& g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (S& g : grad) g = static_cast<S>(static_cast<double>(g) * scale);
  }
  return norm;
}

}  // namespace coala::training

#endif  // COALA_TRAINING_OPTIM_HPP_
