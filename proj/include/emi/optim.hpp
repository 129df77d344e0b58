#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "emi/errors.hpp"
#include "emi/tensor.hpp"

namespace emi {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  double clip_norm = 1.0;  ///< <= 0 disables clipping
};

/// Parameters sharing one learning rate.
template <typename Scalar>
struct OptimGroup {
  std::string name;
  double lr = 0;
  std::vector<Tensor<Scalar>> params;
};

/// Global L2 norm over the gradients present in `params`.
template <typename Scalar>
double global_grad_norm(const std::vector<const Tensor<Scalar>*>& params) {
  double ss = 0;
  for (const auto* p : params) {
    if (p->has_grad()) ss += p->grad().template cast<double>().squaredNorm();
  }
  return std::sqrt(ss);
}

/// Scales gradients so their global norm is at most `max_norm`; returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(const std::vector<const Tensor<Scalar>*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (max_norm > 0 && norm > max_norm) {
    const auto scale = static_cast<Scalar>(max_norm / norm);
    for (const auto* p : params) {
      if (!p->has_grad()) continue;
      Tensor<Scalar> handle = *p;
      handle.mutable_grad() *= scale;
    }
  }
  return norm;
}

/// Adam with decoupled weight decay and per-group learning rates.
///
/// A step clips the gradients of all trainable groups by their joint norm,
/// decays each parameter by (1 - lr * wd), then applies the bias-corrected
/// Adam update. Groups with lr == 0 are left untouched, moments included.
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<OptimGroup<Scalar>> groups, AdamWConfig cfg = {}) : groups_(std::move(groups)), cfg_(cfg) {
    if (!(cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1)) {
      throw ConfigError("AdamW betas must lie in [0, 1)");
    }
    if (!(cfg_.eps > 0) || !(cfg_.weight_decay >= 0)) throw ConfigError("AdamW eps must be > 0 and weight decay >= 0");
    for (const auto& g : groups_) {
      if (!(g.lr >= 0) || !std::isfinite(g.lr)) throw ConfigError("learning rate of group '" + g.name + "' is invalid");
      std::vector<State> states;
      for (const auto& p : g.params) {
        states.push_back({Matrix<Scalar>::Zero(p.rows(), p.cols()), Matrix<Scalar>::Zero(p.rows(), p.cols())});
      }
      state_.push_back(std::move(states));
    }
  }

  const std::vector<OptimGroup<Scalar>>& groups() const { return groups_; }
  std::size_t group_count() const { return groups_.size(); }
  double lr(std::size_t group) const { return groups_.at(group).lr; }
  void set_lr(std::size_t group, double lr) { groups_.at(group).lr = lr; }
  std::size_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  double last_grad_norm() const { return last_norm_; }

  void zero_grad() {
    for (auto& g : groups_) {
      for (auto& p : g.params) p.zero_grad();
    }
  }

  void step() {
    std::vector<const Tensor<Scalar>*> trainable;
    for (const auto& g : groups_) {
      if (g.lr == 0) continue;
      for (const auto& p : g.params) trainable.push_back(&p);
    }
    last_norm_ = clip_grad_norm(trainable, cfg_.clip_norm);
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const auto b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      auto& g = groups_[gi];
      if (g.lr == 0) continue;
      const auto decay = static_cast<Scalar>(1.0 - g.lr * cfg_.weight_decay);
      const auto step_size = static_cast<Scalar>(g.lr / bc1);
      const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
      const auto eps = static_cast<Scalar>(cfg_.eps);
      for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
        auto& p = g.params[pi];
        if (!p.has_grad()) continue;
        auto& [m, v] = state_[gi][pi];
        const auto& grad = p.grad();
        m = b1 * m + (Scalar(1) - b1) * grad;
        v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
        auto& w = p.mutable_value();
        if (cfg_.weight_decay != 0) w *= decay;
        w.array() -= step_size * m.array() / ((v.array() * inv_bc2).sqrt() + eps);
      }
    }
  }

 private:
  struct State {
    Matrix<Scalar> m, v;
  };
  std::vector<OptimGroup<Scalar>> groups_;
  AdamWConfig cfg_;
  std::vector<std::vector<State>> state_;
  std::size_t step_ = 0;
  double last_norm_ = 0;
};

}  // namespace emi
