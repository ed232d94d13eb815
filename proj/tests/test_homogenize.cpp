#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"

#include "hjlab/errors.hpp"
#include "hjlab/homogenize.hpp"
#include "test_support.hpp"

using namespace hjlab;
using namespace hjlab::testing;

namespace {

EnsembleSpec free_ensemble() {
  EnsembleSpec s;
  s.env = free_spec(64);
  s.grid = grid1(1.0 / 16, 1.0 / 16, 1.0, 4.0);
  s.replicas = 2;
  return s;
}

EnsembleSpec bounded_ensemble(int M) {
  EnsembleSpec s;
  s.env = bounded_spec(21, 80);
  s.grid = grid1(0.25, 0.25, 1.0, 4.0);
  s.replicas = M;
  return s;
}

}  // namespace

TEST_SUITE("homogenize") {

TEST_CASE("free case effective Lagrangian at v = 1") {
  EnsembleSpec s = free_ensemble();
  s.velocities = {Point{1.0, 0.0}};
  s.ladder = {8.0, 16.0, 32.0};
  const EffectiveProfile p = estimate_Lbar(s);
  CHECK(p.profile.values[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(p.se[0] == doctest::Approx(0.0));
  CHECK(p.t_max == 32.0);
  // exact limit already attained: differences along the ladder shrink
  const auto& r = p.rung_means[0];
  CHECK(std::fabs(r[1] - r[2]) <= std::fabs(r[0] - r[1]) + 1e-12);
}

TEST_CASE("periodic cell problem") {
  EnsembleSpec s;
  s.env.law = AmplitudeLaw::periodic;
  s.env.law_param = 1.0;
  s.env.period = 1.0;
  s.env.slab_count = 40;
  s.grid = grid1(1.0 / 32, 1.0 / 32, 1.0, 4.0);
  s.replicas = 2;
  s.ladder = {8.0, 16.0, 32.0};
  s.velocities.clear();
  for (int i = -8; i <= 8; ++i) s.velocities.push_back(Point{i / 8.0, 0.0});
  const EffectiveProfile p = estimate_Lbar(s);
  // min V = -1 at x = 1/2, reached at O(1) cost
  CHECK(p.profile.values[8] == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(p.extrapolated.values[8] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(p.profile.values[8] > -1.0);
  const HbarEstimate h = estimate_Hbar(p.profile, {0.0, 0.0}, s.model);
  CHECK(h.value == doctest::Approx(1.0).epsilon(0.05));
  CHECK_FALSE(h.coercive);  // Lbar(0) < 1 without the normalizing shift
}

TEST_CASE("Hbar") {
  const LagrangianModel m;
  const auto quad = ConvexProfile::sample_1d(-4, 4, 1.0 / 32, [](double v) { return v * v / 2; });
  CHECK(estimate_Hbar(quad, {0.0, 0.0}, m).value == doctest::Approx(0.0));
  std::vector<double> hs;
  for (int i = -8; i <= 8; ++i) hs.push_back(estimate_Hbar(quad, {i / 8.0, 0.0}, m).value);
  for (std::size_t i = 1; i + 1 < hs.size(); ++i) CHECK(2 * hs[i] <= hs[i - 1] + hs[i + 1] + 1e-12);
  CHECK_THROWS_AS(estimate_Hbar(quad, {3.0, 0.0}, m), ValidationError);
  const auto shifted = ConvexProfile::sample_1d(-4, 4, 1.0 / 32, [](double v) { return v * v + 1.0; });
  CHECK(estimate_Hbar(shifted, {0.0, 0.0}, m).coercive);
}

TEST_CASE("Richardson proxy") {
  std::vector<double> t{32, 64, 128, 256}, f;
  for (double x : t) f.push_back(0.7 + 2.0 / std::sqrt(x));
  const Extrapolation e = richardson_limit(f, t);
  CHECK_FALSE(e.fallback);
  CHECK(e.value == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(e.order == doctest::Approx(0.5).epsilon(1e-12));
  const Extrapolation flat = richardson_limit({1.0, 1.0, 1.0}, {1, 2, 4});
  CHECK(flat.fallback);
  CHECK(flat.value == 1.0);
}

TEST_CASE("rate fitter") {
  std::vector<double> t{32, 64, 128, 256}, y;
  for (double x : t) y.push_back(3.0 / std::sqrt(x));
  const RateFit f = fit_rate(t, y);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK_FALSE(f.degenerate);
  const RateFit z = fit_rate(t, {0.0, 1e-12, 0.0, 0.0});
  CHECK(z.degenerate);
}

TEST_CASE("free case rates are degenerate or zero") {
  EnsembleSpec s = free_ensemble();
  s.grid = grid1(0.25, 0.25, 1.0, 4.0);
  s.ladder = {4.0, 8.0, 16.0};
  const RateFit gap = deterministic_gap(s, {0.0, 0.0});
  CHECK(gap.degenerate);
  const RateFit avg = large_time_average_error(s, 1.0);
  CHECK(avg.degenerate);
  for (double o : avg.ordinates) CHECK(o <= 1e-12);
  const auto lbar = ConvexProfile::sample_1d(-4, 4, 1.0 / 64, [](double v) { return v * v / 2; });
  auto g = [](const Point& y) { return std::min(std::fabs(y[0]), 1.0); };
  s.grid = grid1(1.0 / 16, 1.0 / 16, 1.0, 4.0);
  const RateFit h = homog_error_curve(s, lbar, g, {0.5, 0.25, 0.125}, 1.0, 1.0);
  for (double o : h.ordinates) CHECK(o <= 1.0 / 16 + 1.0 / 16);
}

TEST_CASE("eps = 1 rung equals the unscaled discrepancy") {
  EnsembleSpec s = bounded_ensemble(2);
  const auto lbar = ConvexProfile::sample_1d(-4, 4, 1.0 / 16, [](double v) { return v * v / 2; });
  auto g = [](const Point& y) { return std::min(std::fabs(y[0]), 1.0); };
  const RateFit h = homog_error_curve(s, lbar, g, {1.0, 0.5, 0.25}, 2.0, 1.0);
  std::vector<double> direct;
  for (int i = 0; i < 2; ++i) {
    const Environment env = s.replica(i);
    const GridSpec gr = s.padded_grid(1.0 + 4.0 * 2.0, "direct");
    const auto u = hopf_lax_solve(env, s.model, gr, sample_initial_data(gr, g), 0.0, 2.0);
    double sup = 0;
    for (double x = -1; x <= 1; x += gr.dx)
      sup = std::max(sup, std::fabs(u.value_at(u.steps, {x, 0.0}) - effective_hopf_lax(lbar, g, {x, 0.0}, 2.0)));
    direct.push_back(sup);
  }
  CHECK(h.ordinates[0] == doctest::Approx(median(direct)).epsilon(1e-12));
}

TEST_CASE("fluctuations") {
  SUBCASE("deterministic environment is flagged") {
    EnsembleSpec s = free_ensemble();
    s.grid = grid1(0.25, 0.25, 1.0, 4.0);
    const ConcentrationReport r = fluctuation_stats(s, {0.0, 0.0}, 8.0);
    CHECK(r.deterministic);
    CHECK(r.variance == 0.0);
  }
  SUBCASE("random environment: Z is centred") {
    EnsembleSpec s = bounded_ensemble(100);
    const ConcentrationReport r = fluctuation_stats(s, {0.0, 0.0}, 8.0);
    CHECK_FALSE(r.deterministic);
    CHECK(std::fabs(mean(r.z)) <= 1e-12);
    CHECK(r.lambda.size() == 20);
    CHECK(r.C0 == doctest::Approx(2.0));
  }
  SUBCASE("M >= 2") {
    EnsembleSpec s = bounded_ensemble(1);
    CHECK_THROWS_AS(fluctuation_stats(s, {0.0, 0.0}, 8.0), ValidationError);
  }
}

TEST_CASE("ensemble statistics are reproducible and independent of workers") {
  EnsembleSpec s = bounded_ensemble(6);
  s.ladder = {4.0, 8.0, 16.0};
  s.velocities = {Point{0.0, 0.0}, Point{0.5, 0.0}};
  const LadderSamples a = sample_ladder(s);
  s.workers = 3;
  const LadderSamples b = sample_ladder(s);
  bool same = true;
  for (std::size_t v = 0; v < a.values.size(); ++v)
    for (std::size_t r = 0; r < a.values[v].size(); ++r)
      same = same && std::memcmp(a.values[v][r].data(), b.values[v][r].data(),
                                 a.values[v][r].size() * sizeof(double)) == 0;
  CHECK(same);
}

TEST_CASE("mean subadditivity, proxy ordering and variance growth") {
  EnsembleSpec s = bounded_ensemble(24);
  s.ladder = {8.0, 16.0, 32.0};
  const LadderSamples ls = sample_ladder(s);
  for (std::size_t r = 0; r + 1 < s.ladder.size(); ++r) {
    // E m(0,2t) <= 2 E m(0,t) by stationarity in time up to sampling error
    const double m1 = ls.mean(0, r) * s.ladder[r], m2 = ls.mean(0, r + 1) * s.ladder[r + 1];
    const double se = 2.0 * ls.se(0, r) * s.ladder[r] + ls.se(0, r + 1) * s.ladder[r + 1];
    CHECK(m2 <= 2.0 * m1 + 2.0 * se);
  }
  const RateFit gap = deterministic_gap(s, {0.0, 0.0});
  CHECK(gap.ordering_ok);
  for (std::size_t r = 0; r + 1 < gap.rung_variance.size(); ++r) {
    const double a = gap.rung_variance[r] / (s.ladder[r] * s.ladder[r]);
    const double b = gap.rung_variance[r + 1] / (s.ladder[r + 1] * s.ladder[r + 1]);
    CHECK(b < a);
  }
}

TEST_CASE("validation") {
  EnsembleSpec s = bounded_ensemble(4);
  s.ladder = {16.0, 8.0};
  CHECK_THROWS_AS(sample_ladder(s), ValidationError);
  s.ladder = {8.0};
  s.velocities = {Point{9.0, 0.0}};
  CHECK_THROWS_AS(sample_ladder(s), ValidationError);
  s.velocities = {Point{0.0, 0.0}};
  s.auto_pad = false;
  s.grid.half_width = 2.0;
  CHECK_THROWS_AS(sample_ladder(s), ValidationError);
  s = bounded_ensemble(4);
  s.ladder = {8.0, 16.0};
  CHECK_THROWS_AS(deterministic_gap(s, {0.0, 0.0}), ValidationError);
}

TEST_CASE("effective CSV") {
  EnsembleSpec s = free_ensemble();
  s.velocities = {Point{-0.5, 0.0}, Point{0.0, 0.0}, Point{0.5, 0.0}};
  s.ladder = {4.0};
  const EffectiveProfile p = estimate_Lbar(s);
  std::stringstream ss;
  write_effective_csv(ss, p);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "v,value,se,replicas,t_max,extrapolated");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 3);
}

}  // TEST_SUITE

TEST_SUITE("stats") {

TEST_CASE("basic reductions") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(mean(x) == 2.5);
  CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
  CHECK(standard_error(x) == doctest::Approx(std::sqrt(5.0 / 12.0)));
  CHECK(median(x) == 2.5);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(correlation(x, {2, 4, 6, 8}) == doctest::Approx(1.0));
  const LineFit f = fit_line(x, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(-1.0));
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({1, 2, 3}, {10, 11, 12}) == 1.0);
  CHECK(ks_critical(10000, 10000, 0.01) == doctest::Approx(1.6276 * std::sqrt(2.0 / 10000)).epsilon(1e-3));
}

}  // TEST_SUITE
