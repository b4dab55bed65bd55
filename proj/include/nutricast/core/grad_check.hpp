#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nutricast/core/autograd.hpp"
#include "nutricast/core/random.hpp"

namespace nutricast {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t samples = 256;
  std::uint64_t seed = 0;
  /// Both gradients below this count as zero; finite differences cannot
  /// resolve anything smaller (e.g. attention key biases, exactly 0).
  double zero_tolerance = 1e-7;
  /// Applied to the analytic gradients before comparison (fault injection).
  std::function<void(ParameterStore<double>&)> tamper;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t near_zero = 0;  // sampled, but both gradients under zero_tolerance
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds the scalar loss on a fresh tape.
using LossBuilder = std::function<Var(Tape<double>&, ParameterStore<double>&)>;

/// Compares analytic gradients against central differences on a random
/// sample of trainable coordinates:
///   max |analytic - numeric| / max(|analytic|, |numeric|)
/// over coordinates where either side reaches zero_tolerance.
inline GradCheckResult grad_check(ParameterStore<double>& params, const LossBuilder& build,
                                  const GradCheckOptions& opt = {}) {
  if (!(opt.eps >= 1e-7 && opt.eps <= 1e-3)) throw DomainError("grad_check: eps out of range");
  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(build(tape, params));
  }
  if (opt.tamper) opt.tamper(params);

  struct Coord {
    Parameter<double>* p;
    std::size_t index;
  };
  std::vector<Parameter<double>*> trainable;
  std::size_t total = 0;
  for (auto& [_, p] : params)
    if (p.trainable) {
      trainable.push_back(&p);
      total += p.value.size();
    }
  if (total == 0) return {};

  Rng rng(opt.seed);
  std::vector<Coord> coords;
  const std::size_t want = std::min(opt.samples, total);
  if (want == total) {
    for (auto* p : trainable)
      for (std::size_t i = 0; i < p->value.size(); ++i) coords.push_back({p, i});
  } else {
    for (std::size_t s = 0; s < want; ++s) {
      std::size_t flat = static_cast<std::size_t>(rng.below(total));
      for (auto* p : trainable) {
        if (flat < p->value.size()) {
          coords.push_back({p, flat});
          break;
        }
        flat -= p->value.size();
      }
    }
  }

  auto evaluate = [&] {
    Tape<double> tape;
    return tape.value(build(tape, params))[0];
  };

  GradCheckResult result;
  result.coordinates = coords.size();
  for (const Coord& c : coords) {
    const double original = c.p->value[c.index];
    c.p->value[c.index] = original + opt.eps;
    const double up = evaluate();
    c.p->value[c.index] = original - opt.eps;
    const double down = evaluate();
    c.p->value[c.index] = original;
    const double numeric = (up - down) / (2.0 * opt.eps);
    const double analytic = c.p->has_grad() ? c.p->grad[c.index] : 0.0;
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < opt.zero_tolerance) {
      ++result.near_zero;
      continue;
    }
    const double err = std::abs(analytic - numeric) / denom;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = c.p->name + "[" + std::to_string(c.index) + "]";
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace nutricast
