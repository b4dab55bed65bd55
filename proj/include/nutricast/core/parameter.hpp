#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include "nutricast/core/error.hpp"
#include "nutricast/core/random.hpp"
#include "nutricast/core/tensor.hpp"

namespace nutricast {

/// A named, optionally trainable weight. `grad` stays empty until a backward
/// pass reaches the parameter, and frozen parameters never receive one.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  bool has_grad() const noexcept { return !grad.empty(); }
};

/// Owns every parameter of a model, keyed by dotted path. Iteration order is
/// lexicographic by name, which fixes serialization and reduction order.
template <typename T>
class ParameterStore {
 public:
  using Map = std::map<std::string, Parameter<T>, std::less<>>;

  Parameter<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
    auto [it, inserted] = params_.try_emplace(name, Parameter<T>{name, std::move(value), {}, trainable});
    if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
    return it->second;
  }

  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }

  Parameter<T>& at(std::string_view name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }
  const Parameter<T>& at(std::string_view name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const noexcept { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad = Tensor<T>();
  }

  /// Set the trainable flag on every parameter whose name starts with `prefix`.
  void set_trainable(std::string_view prefix, bool trainable) {
    for (auto& [name, p] : params_) {
      if (name.starts_with(prefix)) p.trainable = trainable;
    }
  }

  void erase_prefix(std::string_view prefix) {
    for (auto it = params_.begin(); it != params_.end();) {
      it = it->first.starts_with(prefix) ? params_.erase(it) : std::next(it);
    }
  }

 private:
  Map params_;
};

template <typename T>
Tensor<T> normal_tensor(Rng& rng, Shape shape, double stddev) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

/// Fan-in scaled normal init for a [fan_in x fan_out] weight.
template <typename T>
Tensor<T> fan_in_normal(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  return normal_tensor<T>(rng, {fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace nutricast
