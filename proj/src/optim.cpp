#include "mmgn/optim.hpp"

#include <cmath>

#include "mmgn/error.hpp"

namespace mmgn {

namespace {

const Array& grad_for(const GradMap& grads, const std::string& name, const Array& param) {
  auto it = grads.find(name);
  if (it == grads.end()) throw Error("optimizer: missing gradient for '" + name + "'");
  if (!it->second.same_shape(param)) {
    throw ShapeError("optimizer: gradient shape mismatch for '" + name + "'");
  }
  if (!it->second.all_finite()) {
    throw NonFiniteError("optimizer: non-finite gradient for '" + name + "'");
  }
  return it->second;
}

}  // namespace

void sgd_step(ParamSet& params, const GradMap& grads, double lr) {
  if (!(lr > 0.0)) throw Error("sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, arr] = params.entry(i);
    const Array& g = grad_for(grads, name, arr);
    for (std::size_t j = 0; j < arr.numel(); ++j) arr[j] -= lr * g[j];
  }
}

void adam_step(OptimState& state, ParamSet& params, const GradMap& grads) {
  if (!state.initialized || state.kind != OptimKind::kAdam) {
    throw Error("adam_step: state not initialized for Adam");
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, arr] = params.entry(i);
    const Array& g = grad_for(grads, name, arr);
    Array& m = state.m.at(name);
    Array& v = state.v.at(name);
    for (std::size_t j = 0; j < arr.numel(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      arr[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
    }
    if (state.weight_decay != 0.0) {
      const double shrink = 1.0 - state.learning_rate * state.weight_decay;
      for (std::size_t j = 0; j < arr.numel(); ++j) arr[j] *= shrink;
    }
  }
}

}  // namespace mmgn
