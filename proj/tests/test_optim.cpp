#include <doctest.h>

#include <cmath>

#include "mmgn/optim.hpp"

using namespace mmgn;

namespace {

ParamSet single_param(double value) {
  ParamSet p;
  p.add("theta", Array::scalar(value));
  return p;
}

GradMap grad_of(double g) {
  GradMap m;
  m.emplace("theta", Array::scalar(g));
  return m;
}

}  // namespace

TEST_CASE("sgd step arithmetic") {
  SUBCASE("theta 0, g 2, lr 0.5 gives -1") {
    ParamSet p = single_param(0.0);
    sgd_step(p, grad_of(2.0), 0.5);
    CHECK(p.at("theta")[0] == doctest::Approx(-1.0));
  }
  SUBCASE("zero gradient leaves theta unchanged") {
    ParamSet p = single_param(0.7);
    sgd_step(p, grad_of(0.0), 0.1);
    CHECK(p.at("theta")[0] == 0.7);
  }
  SUBCASE("vector case") {
    ParamSet p;
    p.add("theta", Array({2}, {1.0, 2.0}));
    GradMap g;
    g.emplace("theta", Array({2}, {1.0, 1.0}));
    sgd_step(p, g, 0.1);
    CHECK(p.at("theta")[0] == doctest::Approx(0.9));
    CHECK(p.at("theta")[1] == doctest::Approx(1.9));
  }
  SUBCASE("non-finite gradient is an error") {
    ParamSet p = single_param(0.0);
    CHECK_THROWS_AS(sgd_step(p, grad_of(std::nan("")), 0.1), NonFiniteError);
  }
  SUBCASE("non-positive learning rate is an error") {
    ParamSet p = single_param(0.0);
    CHECK_THROWS_AS(sgd_step(p, grad_of(1.0), 0.0), Error);
  }
}

TEST_CASE("adam step arithmetic") {
  SUBCASE("step one with unit gradient moves by about lr") {
    ParamSet p = single_param(1.0);
    OptimState st = OptimState::adam(p, 0.001, 0.0);
    adam_step(st, p, grad_of(1.0));
    // Bias-corrected m-hat / sqrt(v-hat) is exactly 1 at step one.
    CHECK(p.at("theta")[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
  }
  SUBCASE("zero gradients with zero decay leave theta unchanged") {
    ParamSet p = single_param(0.4);
    OptimState st = OptimState::adam(p, 0.001, 0.0);
    for (int i = 0; i < 5; ++i) adam_step(st, p, grad_of(0.0));
    CHECK(p.at("theta")[0] == 0.4);
  }
  SUBCASE("decay-only shrinks by (1 - lr wd) per step") {
    ParamSet p = single_param(1.0);
    OptimState st = OptimState::adam(p, 0.001, 0.01);
    adam_step(st, p, grad_of(0.0));
    CHECK(p.at("theta")[0] == doctest::Approx(1.0 - 1e-5));
    adam_step(st, p, grad_of(0.0));
    CHECK(p.at("theta")[0] == doctest::Approx((1.0 - 1e-5) * (1.0 - 1e-5)));
  }
  SUBCASE("uninitialized state is an error") {
    ParamSet p = single_param(0.0);
    OptimState st;
    CHECK_THROWS_AS(adam_step(st, p, grad_of(1.0)), Error);
  }
  SUBCASE("step counter strictly increases") {
    ParamSet p = single_param(0.0);
    OptimState st = OptimState::adam(p, 0.001, 0.0);
    CHECK(st.step == 0);
    adam_step(st, p, grad_of(1.0));
    CHECK(st.step == 1);
    adam_step(st, p, grad_of(1.0));
    CHECK(st.step == 2);
  }
}
