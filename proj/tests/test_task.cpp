#include <catch_amalgamated.hpp>

#include "cwm/rng.hpp"
#include "cwm/task.hpp"

using namespace cwm;

TEST_CASE("discretize examples") {
  CHECK(discretize(0.41, 11) == Catch::Approx(0.4).margin(1e-12));
  CHECK(discretize(-1.0, 11) == -1.0);
  CHECK(discretize(1.0, 11) == 1.0);
  // declared tie rule: midpoints round toward +1
  CHECK(discretize(0.5, 11) == Catch::Approx(0.6).margin(1e-12));
  CHECK(discretize(-0.5, 11) == Catch::Approx(-0.4).margin(1e-12));
  CHECK(discretize(0.0, 11) == 0.0);
  REQUIRE_THROWS_AS(discretize(0.0, 1), ContractError);
}

TEST_CASE("discretize properties") {
  Rng r(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = r.uniform(-1.0, 1.0);
    const int levels = 2 + static_cast<int>(r.uniform01() * 20);
    const double d = discretize(v, levels);
    CHECK(discretize(d, levels) == d);                       // idempotent
    CHECK(std::abs(v - d) <= 1.0 / (levels - 1) + 1e-12);    // error bound
  }
}

TEST_CASE("generate_trace semantics") {
  TaskSpec spec;
  spec.n_steps = 5000;
  spec.trigger_prob = 0.02;
  spec.seed = 9;

  SECTION("original: M latches V at triggers and stays constant") {
    const TaskTrace tr = generate_trace(spec);
    REQUIRE(tr.T(0) == 1.0);
    double cur = 0.0;
    for (long i = 0; i < tr.size(); ++i) {
      if (tr.T(i) == 1.0) cur = tr.V(i);
      REQUIRE(tr.M(i) == cur);
      REQUIRE(tr.V(i) >= -1.0);
      REQUIRE(tr.V(i) <= 1.0);
      REQUIRE(tr.M(i) >= -1.0);
      REQUIRE(tr.M(i) <= 1.0);
      if (i > 0 && tr.T(i) == 0.0) REQUIRE(tr.M(i) == tr.M(i - 1));
    }
  }

  SECTION("min_gap is honored") {
    spec.min_gap = 5;
    spec.trigger_prob = 0.5;
    const TaskTrace tr = generate_trace(spec);
    long last = -100;
    long count = 0;
    for (long i = 0; i < tr.size(); ++i)
      if (tr.T(i) == 1.0) {
        if (last >= 0) REQUIRE(i - last > 5);
        last = i;
        ++count;
      }
    REQUIRE(count > 100);  // triggers do happen
  }

  SECTION("c2d: targets discretized, V untouched") {
    spec.variant = TaskVariant::C2D;
    const TaskTrace tr = generate_trace(spec);
    long offgrid_v = 0;
    for (long i = 0; i < tr.size(); ++i)
      if (tr.T(i) == 1.0) {
        REQUIRE(tr.M(i) == discretize(tr.V(i), spec.n_levels));
        if (tr.V(i) != discretize(tr.V(i), spec.n_levels)) ++offgrid_v;
      }
    REQUIRE(offgrid_v > 0);
  }

  SECTION("d2d: trigger V replaced by its discretization") {
    spec.variant = TaskVariant::D2D;
    const TaskTrace tr = generate_trace(spec);
    for (long i = 0; i < tr.size(); ++i)
      if (tr.T(i) == 1.0) {
        REQUIRE(tr.V(i) == discretize(tr.V(i), spec.n_levels));
        REQUIRE(tr.M(i) == tr.V(i));
      }
  }

  SECTION("determinism") {
    const TaskTrace a = generate_trace(spec);
    const TaskTrace b = generate_trace(spec);
    REQUIRE(a.V == b.V);
    REQUIRE(a.T == b.T);
    REQUIRE(a.M == b.M);
  }
}

TEST_CASE("single_hold_trace") {
  const TaskTrace tr = single_hold_trace(0.4, 100, 3);
  REQUIRE(tr.size() == 100);
  CHECK(tr.T(0) == 1.0);
  CHECK(tr.T.sum() == 1.0);
  CHECK(tr.V(0) == 0.4);
  for (long i = 0; i < tr.size(); ++i) CHECK(tr.M(i) == 0.4);

  SECTION("m = 0 gives all-zero targets") {
    const TaskTrace z = single_hold_trace(0.0, 50, 3);
    CHECK(z.M.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("concatenating two holds is a valid two-trigger trace") {
    const TaskTrace a = single_hold_trace(0.2, 60, 1);
    const TaskTrace b = single_hold_trace(-0.6, 40, 2);
    TaskTrace cat;
    cat.V.resize(100);
    cat.T.resize(100);
    cat.M.resize(100);
    cat.V << a.V, b.V;
    cat.T << a.T, b.T;
    cat.M << a.M, b.M;
    // M changes only at trigger steps
    for (long i = 1; i < cat.size(); ++i)
      if (cat.T(i) == 0.0) REQUIRE(cat.M(i) == cat.M(i - 1));
    REQUIRE(cat.T.sum() == 2.0);
  }
}
