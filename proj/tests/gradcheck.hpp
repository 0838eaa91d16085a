#pragma once

// Central finite-difference oracle for tape gradients, shared by the unit
// suite and the acceptance suite. Independent of the backward pass: it only
// re-runs forward() on perturbed leaves.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mmgn/rng.hpp"
#include "mmgn/tape.hpp"

namespace mmgn::test {

// Builds a tape with named trainable leaves and returns the scalar loss node.
using TapeBuilder = std::function<NodeId(Tape&, std::map<std::string, NodeId>&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Compares backward() gradients of every leaf against central differences
// (h = 1e-5 scaled). Relative error uses a floor so near-zero gradients
// don't inflate the ratio.
inline GradCheckReport grad_check(const std::map<std::string, Array>& leaves,
                                  const TapeBuilder& build) {
  Tape tape;
  std::map<std::string, NodeId> nodes;
  for (const auto& [name, value] : leaves) {
    nodes[name] = tape.parameter(name, value);
  }
  const NodeId loss = build(tape, nodes);
  tape.backward(loss);

  std::map<std::string, Array> grads;
  for (const auto& [name, node] : nodes) grads[name] = tape.gradient(node);

  GradCheckReport report;
  for (const auto& [name, value] : leaves) {
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(value[i]));
      Array plus = value, minus = value;
      plus[i] += h;
      minus[i] -= h;
      tape.forward({{name, plus}});
      const double f_plus = tape.value(loss)[0];
      tape.forward({{name, minus}});
      const double f_minus = tape.value(loss)[0];
      tape.forward({{name, value}});
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double analytic = grads[name][i];
      const double rel =
          std::abs(analytic - fd) / std::max({1e-3, std::abs(analytic), std::abs(fd)});
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.checked;
    }
  }
  return report;
}

inline Array random_array(const std::vector<std::size_t>& shape, Rng& rng, double lo = -1.5,
                          double hi = 1.5) {
  Array a(shape);
  for (double& v : a.values()) v = rng.uniform(lo, hi);
  return a;
}

// Reduce any array node to a scalar by a fixed random weighting, so every
// output element participates in the loss.
inline NodeId weighted_scalar(Tape& t, NodeId y, Rng& rng) {
  Array w(t.value(y).shape());
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  NodeId scalar = t.mul(y, t.constant(w));
  while (t.value(scalar).numel() > 1) {
    scalar = t.mean_axis(scalar, 0);
  }
  return scalar;
}

// One gradient-check round per primitive op; `cases` random instances each.
// Returns the worst relative error across everything.
double primitive_op_gradcheck(std::size_t cases, std::uint64_t seed);

}  // namespace mmgn::test
