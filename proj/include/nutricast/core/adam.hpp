#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nutricast/core/error.hpp"
#include "nutricast/core/parameter.hpp"

namespace nutricast {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;   // decoupled (AdamW style); 0 disables
  double clip_norm = 0.0;      // global gradient-norm clip; 0 disables
};

/// Adam with per-prefix learning rates. Frozen parameters are skipped and
/// stay bitwise unchanged.
template <typename T>
class Adam {
 public:
  struct Moments {
    Tensor<T> first;
    Tensor<T> second;
  };

  explicit Adam(double default_lr, AdamConfig config = {}) : default_lr_(default_lr), config_(config) {
    if (default_lr < 0) throw DomainError("learning rate must be non-negative");
  }

  /// Parameters whose name starts with `prefix` use `lr`. First match wins.
  void set_group_lr(std::string prefix, double lr) {
    if (lr < 0) throw DomainError("learning rate must be non-negative");
    groups_.emplace_back(std::move(prefix), lr);
  }

  double lr_for(const std::string& name) const {
    for (const auto& [prefix, lr] : groups_)
      if (name.starts_with(prefix)) return lr;
    return default_lr_;
  }

  long step_count() const noexcept { return step_; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }
  const AdamConfig& config() const noexcept { return config_; }

  void step(ParameterStore<T>& params) {
    for (auto& [name, p] : params) {
      if (p.trainable && p.has_grad() && p.grad.shape() != p.value.shape()) {
        throw DimensionError("adam: gradient shape " + shape_string(p.grad.shape()) + " for parameter '" + name +
                             "' of shape " + shape_string(p.value.shape()));
      }
    }
    double clip_scale = 1.0;
    if (config_.clip_norm > 0) {
      double sq = 0;
      for (auto& [_, p] : params)
        if (p.trainable && p.has_grad())
          for (T g : p.grad.values()) sq += static_cast<double>(g) * g;
      const double norm = std::sqrt(sq);
      if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (auto& [name, p] : params) {
      if (!p.trainable) continue;
      auto [it, fresh] = moments_.try_emplace(name);
      Moments& mo = it->second;
      if (fresh) {
        mo.first = Tensor<T>(p.value.shape(), T{0});
        mo.second = Tensor<T>(p.value.shape(), T{0});
      } else if (mo.first.shape() != p.value.shape()) {
        throw DimensionError("adam: moment shape mismatch for '" + name + "'");
      }
      const double lr = lr_for(name);
      const bool has = p.has_grad();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = has ? static_cast<double>(p.grad[i]) * clip_scale : 0.0;
        const double m = config_.beta1 * mo.first[i] + (1.0 - config_.beta1) * g;
        const double v = config_.beta2 * mo.second[i] + (1.0 - config_.beta2) * g * g;
        mo.first[i] = static_cast<T>(m);
        mo.second[i] = static_cast<T>(v);
        if (lr == 0.0) continue;
        const double update = (m / bc1) / (std::sqrt(v / bc2) + config_.epsilon) +
                              config_.weight_decay * static_cast<double>(p.value[i]);
        p.value[i] = static_cast<T>(p.value[i] - lr * update);
      }
    }
  }

 private:
  double default_lr_;
  AdamConfig config_;
  std::vector<std::pair<std::string, double>> groups_;
  std::map<std::string, Moments> moments_;
  long step_ = 0;
};

}  // namespace nutricast
