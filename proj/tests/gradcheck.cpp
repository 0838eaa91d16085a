#include "gradcheck.hpp"

#include <algorithm>

namespace mmgn::test {

namespace {

std::vector<std::size_t> small_shape(Rng& rng) {
  return {2 + rng.below(3), 2 + rng.below(4)};
}

}  // namespace

double primitive_op_gradcheck(std::size_t cases, std::uint64_t seed) {
  double worst = 0.0;
  const auto run = [&](const std::map<std::string, Array>& leaves, const TapeBuilder& build) {
    const GradCheckReport r = grad_check(leaves, build);
    worst = std::max(worst, r.max_rel_err);
  };

  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(Rng::derive(seed, c));

    {  // matmul, both operands, rank 2 and rank 3
      const std::size_t m = 2 + rng.below(3), k = 2 + rng.below(3), n = 2 + rng.below(3);
      const bool batched = rng.bernoulli(0.5);
      const std::vector<std::size_t> a_shape =
          batched ? std::vector<std::size_t>{2, m, k} : std::vector<std::size_t>{m, k};
      run({{"a", random_array(a_shape, rng)}, {"b", random_array({k, n}, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.matmul(p.at("a"), p.at("b")), rng);
          });
    }
    {  // add / sub / mul / div with same-shape, vector and scalar broadcast
      const auto shape = small_shape(rng);
      const int mode = static_cast<int>(rng.below(3));
      std::vector<std::size_t> b_shape = shape;
      if (mode == 1) b_shape = {shape.back()};
      if (mode == 2) b_shape = {1};
      run({{"a", random_array(shape, rng)},
           {"b", random_array(b_shape, rng, 0.5, 2.0)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            const NodeId sum = t.add(p.at("a"), p.at("b"));
            const NodeId diff = t.sub(sum, p.at("b"));
            const NodeId prod = t.mul(diff, p.at("b"));
            const NodeId quot = t.div(prod, p.at("b"));
            return weighted_scalar(t, quot, rng);
          });
    }
    {  // elementwise nonlinearities
      const auto shape = small_shape(rng);
      run({{"x", random_array(shape, rng, -2.0, 2.0)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            const NodeId g = t.gelu(p.at("x"));
            const NodeId th = t.tanh_op(g);
            const NodeId sg = t.sigmoid(th);
            const NodeId sp = t.softplus(sg);
            const NodeId sc = t.scale(t.add_scalar(sp, 0.5), 1.7);
            const NodeId lg = t.log_op(sc);
            return weighted_scalar(t, lg, rng);
          });
    }
    {  // softmax over the last axis
      run({{"x", random_array(small_shape(rng), rng, -3.0, 3.0)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.softmax_last(p.at("x")), rng);
          });
    }
    {  // layer norm
      run({{"x", random_array({2 + rng.below(2), 4 + rng.below(4)}, rng, -2.0, 2.0)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.layer_norm_last(p.at("x")), rng);
          });
    }
    {  // embedding lookup (gradient w.r.t. the table)
      const std::size_t v = 5, e = 3;
      std::vector<int> ids;
      for (std::size_t i = 0; i < 4; ++i) ids.push_back(static_cast<int>(rng.below(v)));
      run({{"table", random_array({v, e}, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.embedding(p.at("table"), ids, {ids.size()}), rng);
          });
    }
    {  // concat on the last axis
      const std::size_t rows = 2 + rng.below(2);
      run({{"a", random_array({rows, 2 + rng.below(2)}, rng)},
           {"b", random_array({rows, 2 + rng.below(2)}, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.concat_last(p.at("a"), p.at("b")), rng);
          });
    }
    {  // mean over an arbitrary axis of a rank-3 array
      const std::vector<std::size_t> shape = {2 + rng.below(2), 2 + rng.below(2),
                                              2 + rng.below(2)};
      const std::size_t axis = rng.below(3);
      run({{"x", random_array(shape, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return weighted_scalar(t, t.mean_axis(p.at("x"), axis), rng);
          });
    }
    {  // repeat_rows + slice_last + stack_axis1
      const std::size_t n = 4 + rng.below(3);
      run({{"x", random_array({n}, rng)}, {"y", random_array({3, n}, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            const NodeId rep = t.repeat_rows(p.at("x"), 3);
            const NodeId sl = t.slice_last(t.add(rep, p.at("y")), 1, n - 2);
            const NodeId stacked = t.stack_axis1({sl, sl});
            return weighted_scalar(t, stacked, rng);
          });
    }
    {  // dropout with an explicit mask
      const auto shape = small_shape(rng);
      Array mask(shape);
      for (double& v : mask.values()) v = rng.bernoulli(0.2) ? 0.0 : 1.0;
      run({{"x", random_array(shape, rng)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            const NodeId m = t.constant(mask);
            return weighted_scalar(t, t.dropout(p.at("x"), m, 1.25), rng);
          });
    }
    {  // cross entropy with a PAD position
      const std::size_t rows = 3, v = 5;
      std::vector<int> targets;
      for (std::size_t i = 0; i < rows; ++i) {
        targets.push_back(rng.bernoulli(0.3) ? -1 : static_cast<int>(rng.below(v)));
      }
      if (std::all_of(targets.begin(), targets.end(), [](int t) { return t == -1; })) {
        targets[0] = 1;
      }
      run({{"logits", random_array({rows, v}, rng, -2.0, 2.0)}},
          [&](Tape& t, std::map<std::string, NodeId>& p) {
            return t.cross_entropy(p.at("logits"), targets, -1);
          });
    }
  }
  return worst;
}

}  // namespace mmgn::test
