#include <cmath>

#include "doctest.h"

#include "hjlab/errors.hpp"
#include "hjlab/geometry_diag.hpp"
#include "test_support.hpp"

using namespace hjlab;
using namespace hjlab::testing;

namespace {

OptimalPath straight(double v, double T, double dt) {
  OptimalPath p;
  const int n = static_cast<int>(std::lround(T / dt));
  for (int k = 0; k <= n; ++k) {
    p.times.push_back(k * dt);
    p.positions.push_back(Point{v * k * dt, 0.0});
  }
  return p;
}

EnsembleSpec free_half_grid() {
  EnsembleSpec s;
  s.env = free_spec(64);
  s.grid = grid1(0.5, 0.5, 1.0, 4.0);
  s.replicas = 2;
  return s;
}

}  // namespace

TEST_SUITE("geometry_diag") {

TEST_CASE("Holder quotients") {
  const Environment env(free_spec(64));
  const LagrangianModel m;
  const HolderReport still = holder_quotients(straight(0.0, 16, 0.25), env, m);
  CHECK(still.path_quotient == 0.0);
  CHECK(still.pairs == 16 * 17 / 2);
  const HolderReport moving = holder_quotients(straight(1.5, 16, 0.25), env, m);
  CHECK(moving.path_quotient > 0.0);
  CHECK(moving.path_quotient <= 1.0);
  CHECK(moving.c1_needed == 0.0);
  // a jump far beyond the envelope needs c1 > 0
  OptimalPath jump = straight(0.0, 8, 0.25);
  for (std::size_t k = 16; k < jump.positions.size(); ++k) jump.positions[k][0] = 20.0;
  HolderOptions ho;
  const HolderReport jr = holder_quotients(jump, env, m, ho);
  CHECK(jr.c1_needed > 0.0);
  ho.slow.c1 = jr.c1_needed * (1.0 + 1e-9);
  const HolderReport tuned = holder_quotients(jump, env, m, ho);
  REQUIRE(std::isfinite(jr.c1_needed));
  CHECK(tuned.path_quotient <= 1.0 + 1e-9);
  REQUIRE(moving.holder_quotient.size() == 2);
  for (double h : moving.holder_quotient) CHECK(h <= 1.0);
  OptimalPath one;
  one.times = {0.0};
  one.positions = {Point{0.0, 0.0}};
  CHECK_THROWS_AS(holder_quotients(one, env, m), ValidationError);
}

TEST_CASE("cone membership") {
  ConeSpec c;
  c.x = Point{2.0, 0.0};
  c.t = 8.0;
  CHECK(cone_member(c, Point{0.0, 0.0}, 1.0));
  CHECK_FALSE(cone_member(c, Point{0.0, 0.0}, 0.5));
  CHECK_FALSE(cone_member(c, Point{0.0, 0.0}, 9.0));
  const double r = c.opening() * 4.0;
  CHECK(cone_member(c, Point{r * 0.999, 0.0}, 4.0));
  CHECK_FALSE(cone_member(c, Point{r * 1.001, 0.0}, 4.0));
  ConeSpec wide = c;
  wide.n = 3.0;
  CHECK(wide.opening() == doctest::Approx(3.0 * c.opening()));
  c.t = 0.5;
  CHECK_THROWS_AS(cone_member(c, Point{0.0, 0.0}, 0.5), ValidationError);
}

TEST_CASE("Q-set oracle on the free environment") {
  const EnsembleSpec s = free_half_grid();
  const Point x{4.0, 0.0};
  const double t = 4.0;
  const QSetOracle o = calibrate_q_oracle(s, x, t);
  CHECK(o.calibrated);
  CHECK(o.shift == doctest::Approx(1.0));
  // Lbar(v) = v^2/2 + 1 after normalization: tangent plane at v = 1
  CHECK(o.ell_y[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(o.ell_s == doctest::Approx(0.5).epsilon(0.02));
  CHECK(o.ell(Point{2.0, 0.0}, 3.0) ==
        doctest::Approx(0.5 * o.ell(Point{4.0, 0.0}, 6.0)));
  CHECK(o.mbar == doctest::Approx(6.0).epsilon(0.02));
  for (double sub = 1.0; sub <= t; sub += 1.0) CHECK(q_member(o, Point{sub, 0.0}, sub));
  CHECK_FALSE(q_member(o, Point{5.0, 0.0}, 5.0));
  const QSetOracle other = calibrate_q_oracle(s, x, t);
  CHECK(other.mbar == o.mbar);
}

TEST_CASE("good skeleton of a free geodesic") {
  const EnsembleSpec s = free_half_grid();
  const Point x{4.0, 0.0};
  const double t = 4.0;
  const QSetOracle o = calibrate_q_oracle(s, x, t);
  const Environment env(s.env);
  for (double n : {1.0, 4.0}) {
    CAPTURE(n);
    const GridSpec g = grid1(0.5, 0.5, 4.0 * n * t + 2.0, 4.0);
    const MetricField f = solve_metric_front(env, s.model, g, Point{0.0, 0.0}, 0.0, n * t);
    const OptimalPath path = backtrace_path(f, f.steps, Point{n * x[0], 0.0});
    Skeleton sk = extract_good_skeleton(path, o, x, t, n);
    CHECK(sk.good);
    CHECK(sk.k() == static_cast<int>(n));
    for (bool b : sk.in_q) CHECK(b);
    for (int j = 0; j + 1 < sk.k(); ++j) CHECK(sk.witness[j].has_value());
    const SkeletonCensus c = skeleton_census(sk, x, t, n, o);
    CHECK(c.count_S == 0);
    CHECK(c.e_within_2n);
    CHECK(c.k_within_10n);
    CHECK(c.count_E + c.count_L + c.count_S + c.count_none == c.k);
  }
  const GridSpec g = grid1(0.5, 0.5, 18.0, 4.0);
  const MetricField f = solve_metric_front(env, s.model, g, Point{0.0, 0.0}, 0.0, 4.0);
  const OptimalPath wrong = backtrace_path(f, f.steps, Point{2.0, 0.0});
  CHECK_THROWS_AS(extract_good_skeleton(wrong, o, x, t, 1.0), ValidationError);
}

TEST_CASE("solution regularity on zero data") {
  const Environment env(free_spec(64));
  const LagrangianModel m;
  const GridSpec g = grid1(0.25, 0.25, 40.0, 4.0);
  const auto u = hopf_lax_solve(env, m, g, sample_initial_data(g, [](const Point&) { return 0.0; }),
                                0.0, 8.0);
  const URegularityReport r = u_regularity_check(u, env, m);
  CHECK(r.space_pairs > 0);
  CHECK(r.space_quotient == 0.0);
  CHECK(r.time_checks > 0);
  CHECK(r.time_violations == 0);
}

}  // TEST_SUITE
