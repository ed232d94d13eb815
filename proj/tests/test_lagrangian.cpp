#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "hjlab/errors.hpp"
#include "hjlab/lagrangian.hpp"

using namespace hjlab;

namespace {

Environment free_env() {
  EnvironmentSpec s;
  s.law_param = 0.0;
  s.slab_count = 16;
  return Environment(s);
}

Environment bounded_env(std::uint64_t seed = 1) {
  EnvironmentSpec s;
  s.law_param = 1.0;
  s.slab_count = 64;
  s.seed = seed;
  return Environment(s);
}

}  // namespace

TEST_SUITE("lagrangian") {

TEST_CASE("eval") {
  const Environment env = free_env();
  LagrangianModel m;
  CHECK(m.eval(env, {0.3, 0.0}, 1.2, {2.0, 0.0}) == doctest::Approx(2.0));
  const Environment be = bounded_env();
  m.c_shift = 0.25;
  const Point x{1.7, 0.0};
  CHECK(m.eval(be, x, 3.3, {0.0, 0.0}) == doctest::Approx(be.sample(x, 3.3).V + 0.25));
}

TEST_CASE("growth sandwich at random points") {
  const Environment env = bounded_env(3);
  const LagrangianModel m;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-100, 100), ut(0, 64), uv(-6, 6);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const Point x{ux(rng), 0.0}, v{uv(rng), 0.0};
    const double t = ut(rng);
    const double L = m.eval(env, x, t, v);
    const double nu = m.nu_at(env, t);
    const double vq = std::pow(std::fabs(v[0]), m.q);
    if (L < vq / m.N1 - nu - 1e-12 || L > m.N1 * vq + nu + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("verify_a2") {
  const LagrangianModel m;
  SUBCASE("homogeneous model passes with zero margins") {
    A2Options o;
    o.n_samples = 20000;
    const A2Report r = verify_a2(m, free_env(), o);
    CHECK(r.pass);
    CHECK(r.bound_violation == 0.0);
    CHECK(r.bound_violations == 0);
    CHECK(r.regularity_violations == 0);
  }
  SUBCASE("bounded model passes") {
    A2Options o;
    o.n_samples = 100000;
    const A2Report r = verify_a2(m, bounded_env(2), o);
    CHECK(r.pass);
    CHECK(r.samples == 100000);
    CHECK(std::isfinite(r.regularity_constant));
  }
  SUBCASE("envelope forced to zero is flagged") {
    A2Options o;
    o.n_samples = 20000;
    o.nu_override = [](double) { return 0.0; };
    const A2Report r = verify_a2(m, bounded_env(2), o);
    CHECK_FALSE(r.pass);
    CHECK(r.bound_violations > 0);
  }
}

TEST_CASE("discrete Legendre transform") {
  const Point p1{1.0, 0.0};
  SUBCASE("quadratic") {
    const auto prof = ConvexProfile::sample_1d(-4, 4, 1.0 / 64, [](double v) { return v * v / 2; });
    const auto r = legendre_argmax(prof, p1);
    CHECK(r.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(prof.point(r.argmax)[0] == doctest::Approx(1.0));
  }
  SUBCASE("absolute value") {
    const auto prof = ConvexProfile::sample_1d(-4, 4, 1.0 / 64, [](double v) { return std::fabs(v); });
    const auto r = legendre_argmax(prof, {0.5, 0.0});
    CHECK(r.value == doctest::Approx(0.0));
    CHECK(prof.point(r.argmax)[0] == doctest::Approx(0.0));
  }
  SUBCASE("cubic") {
    const auto prof = ConvexProfile::sample_1d(
        -4, 4, 1.0 / 64, [](double v) { return std::pow(std::fabs(v), 3) / 3; });
    CHECK(legendre(prof, p1) == doctest::Approx(2.0 / 3.0).epsilon(1e-4));
  }
  SUBCASE("monotone in the profile") {
    const auto lo = ConvexProfile::sample_1d(-3, 3, 0.125, [](double v) { return v * v / 2; });
    const auto hi = ConvexProfile::sample_1d(-3, 3, 0.125, [](double v) { return v * v / 2 + 0.1 * std::fabs(v); });
    for (double p = -1; p <= 1; p += 0.25) CHECK(legendre(hi, {p, 0.0}) <= legendre(lo, {p, 0.0}));
  }
  SUBCASE("biconjugate recovers the profile inside") {
    const double h = 1.0 / 32;
    const auto L = ConvexProfile::sample_1d(-3, 3, h, [](double v) { return v * v / 2 + 0.3 * v; });
    std::vector<double> ps;
    for (int i = -160; i <= 160; ++i) ps.push_back(i * h);
    const ConvexProfile H = legendre_profile(L, ps);
    for (std::size_t i = 0; i < L.size(); ++i) {
      const double v = L.point(i)[0];
      if (std::fabs(v) > 1.5) continue;
      CHECK(legendre(H, {v, 0.0}) == doctest::Approx(L.values[i]).epsilon(4 * h));
    }
  }
  SUBCASE("2-D quadratic") {
    ConvexProfile prof;
    prof.dim = 2;
    for (int i = -32; i <= 32; ++i)
      for (int j = -32; j <= 32; ++j) {
        const double a = i / 8.0, b = j / 8.0;
        prof.coords.push_back(a);
        prof.coords.push_back(b);
        prof.values.push_back((a * a + b * b) / 2);
      }
    CHECK(legendre(prof, {1.0, 0.5}) == doctest::Approx(0.625));
  }
}

TEST_CASE("profile CSV round trip") {
  const auto prof = ConvexProfile::sample_1d(-1, 1, 0.25, [](double v) { return v * v + 0.1; });
  std::stringstream ss;
  write_profile_csv(ss, prof);
  const ConvexProfile back = read_profile_csv(ss);
  REQUIRE(back.size() == prof.size());
  for (std::size_t i = 0; i < prof.size(); ++i) {
    CHECK(back.values[i] == prof.values[i]);
    CHECK(back.coords[i] == prof.coords[i]);
  }
}

TEST_CASE("slow-varying functions") {
  for (double c1 : {0.5, 1.0, 3.0}) CHECK(phi(1.0, {c1, 2.0}) == 1.0);
  for (double t : {0.5, 1.0, 64.0}) CHECK(big_lambda(0.0, t, 2.0) == doctest::Approx(std::log(2.0)));
  const Environment env = free_env();
  CHECK(a_xts(env, 0.0, 8.0, 3.0, 2.0) == doctest::Approx(1.0));
  for (double q : {1.5, 2.0, 3.0}) {
    const SlowVaryingParams p{1.0, q};
    double prev = phi(1.0, p);
    for (double s = 1.5; s < 1e6; s *= 1.7) {
      const double cur = phi(s, p);
      CHECK(cur >= prev);
      prev = cur;
      if (q >= 2.0) CHECK(phi(s * s, p) <= phi(s, p) * phi(s, p) * (1 + 1e-12));
    }
  }
  CHECK(psi(16.0, {}) > 1.0);
  CHECK(phi_rate(16.0, {}) > psi(16.0, {}));
  CHECK_THROWS_AS(psi(2.0, {}), ValidationError);
}

TEST_CASE("exponent sequences") {
  SUBCASE("hand values at q = 2") {
    const auto rows = exponent_sequences(2.0, 3);
    CHECK(rows[0].b == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rows[3].b == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(rows[0].g_of_a == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(rows[1].l == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(rows[2].l == doctest::Approx(6.0).epsilon(1e-13));
  }
  for (double q : {1.5, 2.0, 3.0}) {
    CAPTURE(q);
    const auto rows = exponent_sequences(q, 50);
    REQUIRE(rows.size() == 51);
    for (std::size_t n = 0; n < rows.size(); ++n) {
      CHECK(std::fabs(rows[n].a - (1.0 - rows[n].b)) <= 1e-12);
      CHECK(std::fabs(rows[n].l - rows[n].l_closed) <= 1e-12 * rows[n].l_closed);
      if (n >= 1) {
        CHECK(rows[n].l <= rows[n].l_bound);
        CHECK(rows[n].a > rows[n - 1].a);
      }
      CHECK(rows[n].a < 1.0);
      CHECK(rows[n].f_of_a == doctest::Approx(exponent_g(rows[n].a, q) / q + 1.0 - 1.0 / q));
    }
  }
  CHECK_THROWS_AS(exponent_sequences(1.0, 3), ValidationError);
}

TEST_CASE("normalizing shift and admissible N1") {
  CHECK(normalizing_shift(-1.0) == doctest::Approx(2.0));
  CHECK(normalizing_shift(1.5) == 0.0);
  EnvironmentSpec s;
  s.a_min = 1.0;
  s.a_max = 1.0;
  CHECK(admissible_N1(s, 2.0) >= 2.0);
}

}  // TEST_SUITE
