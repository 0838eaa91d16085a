#pragma once

#include <cmath>
#include <map>
#include <string>

#include "mmgn/params.hpp"

namespace mmgn {

enum class OptimKind { kSgd, kAdam };

// Adam moments plus step counter; SGD carries no state beyond the config.
struct OptimState {
  OptimKind kind = OptimKind::kSgd;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Array> m;  // first moments
  std::map<std::string, Array> v;  // second moments
  bool initialized = false;

  static OptimState sgd(double lr) {
    OptimState s;
    s.kind = OptimKind::kSgd;
    s.learning_rate = lr;
    s.initialized = true;
    return s;
  }

  static OptimState adam(const ParamSet& params, double lr, double weight_decay) {
    OptimState s;
    s.kind = OptimKind::kAdam;
    s.learning_rate = lr;
    s.weight_decay = weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, arr] = params.entry(i);
      s.m.emplace(name, Array(arr.shape()));
      s.v.emplace(name, Array(arr.shape()));
    }
    s.initialized = true;
    return s;
  }
};

// Plain SGD: theta <- theta - lr * g.
void sgd_step(ParamSet& params, const GradMap& grads, double lr);

// Bias-corrected Adam followed by decoupled weight decay
// theta <- theta * (1 - lr * wd).
void adam_step(OptimState& state, ParamSet& params, const GradMap& grads);

}  // namespace mmgn
