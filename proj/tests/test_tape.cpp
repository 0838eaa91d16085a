#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mmgn/tape.hpp"

using namespace mmgn;

TEST_CASE("matmul identity column select") {
  Tape t;
  const NodeId a = t.constant(Array({2, 3}, {1, 2, 3, 4, 5, 6}));
  const NodeId pick = t.constant(Array({3, 1}, {0, 1, 0}));  // selects column 1
  const NodeId c = t.matmul(a, pick);
  CHECK(t.value(c).shape() == std::vector<std::size_t>{2, 1});
  CHECK(t.value(c)[0] == doctest::Approx(2.0));
  CHECK(t.value(c)[1] == doctest::Approx(5.0));
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape t;
  const NodeId x = t.constant(Array({1, 2}, {0.0, 0.0}));
  const NodeId s = t.softmax_last(x);
  CHECK(t.value(s)[0] == doctest::Approx(0.5));
  CHECK(t.value(s)[1] == doctest::Approx(0.5));
}

TEST_CASE("gelu fixed point at zero") {
  CHECK(gelu_value(0.0) == 0.0);
  Tape t;
  const NodeId x = t.constant(Array::scalar(0.0));
  CHECK(t.value(t.gelu(x))[0] == 0.0);
}

TEST_CASE("backward of theta squared") {
  Tape t;
  const NodeId theta = t.parameter("theta", Array::scalar(3.0));
  const NodeId loss = t.mul(theta, theta);
  t.backward(loss);
  CHECK(t.gradient(theta)[0] == doctest::Approx(6.0));
}

TEST_CASE("constant loss gives zero gradients") {
  Tape t;
  const NodeId theta = t.parameter("theta", Array({3}, {1, 2, 3}));
  const NodeId loss = t.constant(Array::scalar(5.0));
  t.backward(loss);
  const Array g = t.gradient(theta);
  for (std::size_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("two-layer net gradient matches finite differences") {
  Rng rng(99);
  const Array x = test::random_array({4, 3}, rng);
  const Array w1 = test::random_array({3, 5}, rng);
  const Array b1 = test::random_array({5}, rng);
  const Array w2 = test::random_array({5, 2}, rng);
  const auto report = test::grad_check(
      {{"w1", w1}, {"b1", b1}, {"w2", w2}},
      [&](Tape& t, std::map<std::string, NodeId>& p) {
        const NodeId h = t.gelu(t.add(t.matmul(t.constant(x), p.at("w1")), p.at("b1")));
        const NodeId y = t.tanh_op(t.matmul(h, p.at("w2")));
        Rng wrng(7);
        return test::weighted_scalar(t, y, wrng);
      });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("every primitive passes the finite-difference oracle") {
  // Smaller case count here; the acceptance suite runs the full 100.
  CHECK(test::primitive_op_gradcheck(20, 0xF00D) < 1e-4);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(1234);
  const Array theta = test::random_array({4}, rng);
  const Array c1 = test::random_array({4}, rng);
  const Array c2 = test::random_array({4}, rng);
  const double a = 1.7, b = -0.6;

  const auto grad_of = [&](double wa, double wb) {
    Tape t;
    const NodeId p = t.parameter("theta", theta);
    const NodeId f = t.mean_axis(t.mul(p, t.constant(c1)), 0);
    const NodeId g = t.mean_axis(t.mul(t.gelu(p), t.constant(c2)), 0);
    const NodeId loss = t.add(t.scale(f, wa), t.scale(g, wb));
    t.backward(loss);
    return t.gradient(p);
  };
  const Array gf = grad_of(1.0, 0.0);
  const Array gg = grad_of(0.0, 1.0);
  const Array combined = grad_of(a, b);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(combined[i] - (a * gf[i] + b * gg[i])) < 1e-10);
  }
}

TEST_CASE("identical tape and inputs give bitwise identical results") {
  const auto run = [] {
    Rng rng(42);
    Tape t;
    const NodeId x = t.parameter("x", test::random_array({3, 4}, rng));
    const NodeId y = t.softmax_last(t.gelu(t.layer_norm_last(x)));
    Rng wrng(5);
    const NodeId loss = test::weighted_scalar(t, y, wrng);
    t.backward(loss);
    return std::make_pair(t.value(y).values(), t.gradient(x).values());
  };
  const auto [v1, g1] = run();
  const auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("cross entropy examples") {
  SUBCASE("probability one on the target gives zero loss") {
    Tape t;
    const NodeId logits = t.constant(Array({1, 3}, {100.0, 0.0, 0.0}));
    const NodeId loss = t.cross_entropy(logits, {0}, -1);
    CHECK(t.value(loss)[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform logits over 33 classes give ln 33") {
    Tape t;
    const NodeId logits = t.constant(Array({2, 33}));
    const NodeId loss = t.cross_entropy(logits, {4, 19}, -1);
    CHECK(t.value(loss)[0] == doctest::Approx(std::log(33.0)));
  }
  SUBCASE("pad positions are excluded from sum and count") {
    Tape t;
    const NodeId logits = t.constant(Array({2, 4}, {1, 2, 3, 4, 9, 9, 9, 9}));
    const NodeId full = t.cross_entropy(logits, {2, 0}, 0);  // second row padded
    Tape t2;
    const NodeId one = t2.constant(Array({1, 4}, {1, 2, 3, 4}));
    const NodeId only = t2.cross_entropy(one, {2}, 0);
    CHECK(t.value(full)[0] == doctest::Approx(t2.value(only)[0]));
  }
  SUBCASE("all pad positions is an error") {
    Tape t;
    const NodeId logits = t.constant(Array({2, 4}));
    CHECK_THROWS_AS(t.cross_entropy(logits, {0, 0}, 0), Error);
  }
}

TEST_CASE("shape errors name the op") {
  Tape t;
  const NodeId a = t.constant(Array({2, 3}));
  const NodeId b = t.constant(Array({4, 2}));
  CHECK_THROWS_WITH_AS(t.matmul(a, b),
                       doctest::Contains("matmul"), ShapeError);
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
}

TEST_CASE("non-finite forward output is an error") {
  Tape t;
  const NodeId x = t.constant(Array::scalar(-1.0));
  CHECK_THROWS_AS(t.log_op(x), NonFiniteError);
}

TEST_CASE("backward requires a scalar loss") {
  Tape t;
  const NodeId x = t.parameter("x", Array({2}, {1.0, 2.0}));
  const NodeId y = t.gelu(x);
  CHECK_THROWS_AS(t.backward(y), Error);
}

TEST_CASE("non-participating parameters get zero gradient") {
  Tape t;
  const NodeId used = t.parameter("used", Array::scalar(2.0));
  const NodeId unused = t.parameter("unused", Array({3}, {1, 2, 3}));
  const NodeId loss = t.mul(used, used);
  t.backward(loss);
  const Array g = t.gradient(unused);
  CHECK(g.shape() == std::vector<std::size_t>{3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("forward rebinds named leaves and re-evaluates") {
  Tape t;
  const NodeId x = t.input("x", Array::scalar(1.0));
  const NodeId y = t.mul(x, x);
  CHECK(t.value(y)[0] == doctest::Approx(1.0));
  t.forward({{"x", Array::scalar(3.0)}});
  CHECK(t.value(y)[0] == doctest::Approx(9.0));
  CHECK_THROWS_AS(t.forward({{"x", Array({2}, {1, 2})}}), ShapeError);
  CHECK_THROWS_AS(t.forward({{"nope", Array::scalar(0.0)}}), Error);
}
