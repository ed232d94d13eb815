#include "hjlab/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hjlab/errors.hpp"
#include "hjlab/parallel.hpp"

namespace hjlab {

namespace {

double max_norm(const std::vector<Point>& vs, int d) {
  double r = 0.0;
  for (const auto& v : vs) r = std::max(r, norm(v, d));
  return r;
}

// Smallest ball (center, radius) holding all points; exact in 1-D, a
// centroid ball in 2-D.
std::pair<Point, double> covering_ball(const std::vector<Point>& pts, int d) {
  Point c{0.0, 0.0};
  if (d == 1) {
    double lo = pts.front()[0], hi = pts.front()[0];
    for (const auto& p : pts) lo = std::min(lo, p[0]), hi = std::max(hi, p[0]);
    c[0] = 0.5 * (lo + hi);
    return {c, 0.5 * (hi - lo)};
  }
  for (const auto& p : pts) c[0] += p[0], c[1] += p[1];
  c[0] /= static_cast<double>(pts.size());
  c[1] /= static_cast<double>(pts.size());
  double r = 0.0;
  for (const auto& p : pts) r = std::max(r, std::hypot(p[0] - c[0], p[1] - c[1]));
  return {c, r};
}

void check_ladder(const std::vector<double>& ladder, std::size_t min_rungs) {
  require(ladder.size() >= min_rungs,
          "time ladder needs at least " + std::to_string(min_rungs) + " rungs");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    require(ladder[i] > 0.0, "ladder rungs must be positive");
    if (i) require(ladder[i] > ladder[i - 1], "time ladder must be sorted increasing");
  }
}

// Slow-varying factors are only defined past e; below that no deflation.
double safe_factor(double (*f)(double, const SlowVaryingParams&), double t,
                   const SlowVaryingParams& p) {
  return t > std::exp(1.0) ? f(t, p) : 1.0;
}

void attach_rung_stats(RateFit& fit, const std::vector<std::vector<double>>& by_rung,
                       const std::vector<double>& ladder) {
  for (std::size_t r = 0; r < by_rung.size(); ++r) {
    fit.rung_mean.push_back(mean(by_rung[r]));
    fit.rung_se.push_back(standard_error(by_rung[r]));
    std::vector<double> unscaled;
    for (double v : by_rung[r]) unscaled.push_back(v * ladder[r]);
    fit.rung_variance.push_back(sample_variance(unscaled));
  }
}

void proxy_warnings(RateFit& fit, const Extrapolation& ex) {
  const std::size_t n = fit.rung_mean.size();
  if (ex.fallback) fit.warnings.push_back("extrapolation unavailable; proxy is the largest rung");
  const double gap = std::abs(fit.rung_mean[n - 1] - fit.rung_mean[n - 2]);
  if (gap > 5.0 * (fit.rung_se[n - 1] + fit.rung_se[n - 2])) {
    fit.warnings.push_back("proxy unstable: last two rungs differ by more than 5 combined SE");
  }
}

}  // namespace

void EnsembleSpec::validate() const {
  env.validate();
  model.validate();
  require(replicas >= 2, "ensemble needs at least 2 replicas (M >= 2)");
  require(workers >= 1, "workers must be >= 1");
  require(!velocities.empty(), "ensemble needs at least one velocity");
  check_ladder(ladder, 1);
  require(grid.d == env.d, "grid and environment dimensions differ");
  for (const auto& v : velocities) {
    if (norm(v, grid.d) > grid.v_cap) {
      throw ValidationError("velocity " + std::to_string(norm(v, grid.d)) + " exceeds v_cap " +
                            std::to_string(grid.v_cap));
    }
  }
}

Environment EnsembleSpec::replica(int i) const { return Environment(env).replica(i); }

GridSpec EnsembleSpec::padded_grid(double reach, const std::string& what) const {
  GridSpec g = grid;
  if (auto_pad) {
    g.half_width = std::max(1.0, std::ceil(reach / grid.dx + 1e-9)) * grid.dx;
  } else if (g.half_width + 1e-9 < reach) {
    throw ValidationError("padding violated for " + what + ": need half_width >= " +
                          std::to_string(reach));
  }
  g.validate();
  return g;
}

double LadderSamples::mean(std::size_t v, std::size_t r) const { return hjlab::mean(values[v][r]); }

double LadderSamples::se(std::size_t v, std::size_t r) const {
  return standard_error(values[v][r]);
}

LadderSamples sample_ladder(const EnsembleSpec& spec) {
  spec.validate();
  const int d = spec.grid.d;
  const double T = spec.t_max();
  std::vector<Point> targets;
  for (const auto& v : spec.velocities) targets.push_back(Point{T * v[0], T * v[1]});
  const auto [center, radius] = covering_ball(targets, d);
  const GridSpec grid = spec.padded_grid(T * max_norm(spec.velocities, d) + spec.grid.v_cap * T,
                                         "velocity targets at t_max");

  std::vector<int> rung_step;
  for (double t : spec.ladder) rung_step.push_back(grid.steps_for(t));

  LadderSamples out;
  out.dim = d;
  out.velocities = spec.velocities;
  out.ladder = spec.ladder;
  const std::size_t nv = spec.velocities.size(), nr = spec.ladder.size();
  out.values.assign(nv, std::vector<std::vector<double>>(nr, std::vector<double>(spec.replicas)));

  parallel_for(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t i) {
    const Environment env = spec.replica(static_cast<int>(i));
    SolveOptions opts;
    opts.keep_layers = false;
    opts.keep_backpointers = false;
    opts.target_center = center;
    opts.target_radius = radius + grid.dx;
    opts.observer = [&](int k, const Layer& layer) {
      for (std::size_t r = 0; r < nr; ++r) {
        if (rung_step[r] != k) continue;
        const double t = spec.ladder[r];
        for (std::size_t v = 0; v < nv; ++v) {
          const Point x{t * spec.velocities[v][0], t * spec.velocities[v][1]};
          const double m = interpolate_layer(grid, layer, x);
          if (m == kInf) throw NumericError("target (t v, t) unreachable at t=" + std::to_string(t));
          out.values[v][r][i] = m / t;
        }
      }
    };
    solve_metric_front(env, spec.model, grid, Point{0.0, 0.0}, 0.0, T, opts);
  });
  return out;
}

Extrapolation richardson_limit(const std::vector<double>& f, const std::vector<double>& t) {
  require(f.size() == t.size() && !f.empty(), "extrapolation needs matching sequences");
  Extrapolation ex{f.back(), 0.0, true};
  const std::size_t n = f.size();
  if (n < 3) return ex;
  const double ratio1 = t[n - 2] / t[n - 3], ratio2 = t[n - 1] / t[n - 2];
  if (std::abs(ratio1 - ratio2) > 1e-9 * ratio2) return ex;
  const double d1 = f[n - 2] - f[n - 3];
  const double d2 = f[n - 1] - f[n - 2];
  if (d1 == 0.0) return ex;
  const double r = d2 / d1;
  if (!(r > 0.0 && r < 1.0)) return ex;
  ex.value = f[n - 1] + d2 * r / (1.0 - r);
  ex.order = -std::log(r) / std::log(ratio2);
  ex.fallback = false;
  return ex;
}

EffectiveProfile profile_from_samples(const LadderSamples& s) {
  EffectiveProfile p;
  const std::size_t nv = s.velocities.size(), nr = s.ladder.size();
  p.replicas = static_cast<int>(s.values.front().front().size());
  p.t_max = s.ladder.back();
  p.ladder = s.ladder;
  p.profile.dim = s.dim;
  p.extrapolated.dim = p.profile.dim;
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<double> means, ses;
    for (std::size_t r = 0; r < nr; ++r) {
      means.push_back(s.mean(v, r));
      ses.push_back(s.se(v, r));
    }
    for (int a = 0; a < p.profile.dim; ++a) {
      p.profile.coords.push_back(s.velocities[v][a]);
      p.extrapolated.coords.push_back(s.velocities[v][a]);
    }
    p.profile.values.push_back(means.back());
    p.se.push_back(ses.back());
    p.extrapolated.values.push_back(richardson_limit(means, s.ladder).value);
    p.rung_means.push_back(std::move(means));
    p.rung_se.push_back(std::move(ses));
  }
  return p;
}

EffectiveProfile estimate_Lbar(const EnsembleSpec& spec) {
  return profile_from_samples(sample_ladder(spec));
}

void write_effective_csv(std::ostream& os, const EffectiveProfile& p) {
  os.precision(17);
  os << (p.profile.dim == 1 ? "v" : "v_x,v_y") << ",value,se,replicas,t_max,extrapolated\n";
  for (std::size_t i = 0; i < p.profile.size(); ++i) {
    for (int a = 0; a < p.profile.dim; ++a)
      os << (a ? "," : "") << p.profile.coords[i * p.profile.dim + a];
    os << ',' << p.profile.values[i] << ',' << p.se[i] << ',' << p.replicas << ',' << p.t_max
       << ',' << p.extrapolated.values[i] << '\n';
  }
}

HbarEstimate estimate_Hbar(const ConvexProfile& lbar, const Point& p, const LagrangianModel& model) {
  lbar.validate();
  model.validate();
  const int d = lbar.dim;
  HbarEstimate h;
  h.cap = 2.0 * std::pow(model.N1 * norm(p, d), 1.0 / (model.q - 1.0));
  double reach = 0.0;
  for (std::size_t i = 0; i < lbar.size(); ++i) reach = std::max(reach, norm(lbar.point(i), d));
  if (reach + 1e-12 < h.cap) {
    throw ValidationError("insufficient velocity coverage: profile reaches |v| = " +
                          std::to_string(reach) + " < cap " + std::to_string(h.cap));
  }
  const auto best = legendre_argmax(lbar, p);
  h.value = best.value;
  h.argmax = lbar.point(best.argmax);
  if (lbar.size() > 1) {
    bool edge = false;
    if (d == 1) {
      const auto [lo, hi] = std::minmax_element(lbar.coords.begin(), lbar.coords.end());
      edge = h.argmax[0] == *lo || h.argmax[0] == *hi;
    } else {
      edge = norm(h.argmax, d) >= reach - 1e-12 && reach > 0.0;
    }
    if (edge) throw ValidationError("insufficient velocity coverage: sup attained at the profile edge");
  }
  h.coercivity_margin = kInf;
  for (std::size_t i = 0; i < lbar.size(); ++i) {
    const double lower = std::pow(norm(lbar.point(i), d), model.q) / model.N1 + 1.0;
    h.coercivity_margin = std::min(h.coercivity_margin, lbar.values[i] - lower);
  }
  h.coercive = h.coercivity_margin >= 0.0;
  return h;
}

ConcentrationReport fluctuation_stats(const EnsembleSpec& spec, const Point& x0, double t0,
                                      const FluctuationOptions& opts) {
  spec.validate();
  opts.slow.validate();
  require(t0 > 1.0, "fluctuation_stats needs t0 > 1");
  require(opts.lambda_points >= 2, "lambda grid needs >= 2 points");
  const int d = spec.grid.d;
  const GridSpec grid = spec.padded_grid(norm(x0, d) + spec.grid.v_cap * t0, "fluctuation point");

  ConcentrationReport rep;
  rep.x0 = x0;
  rep.t0 = t0;
  rep.values.assign(spec.replicas, 0.0);
  parallel_for(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t i) {
    const Environment env = spec.replica(static_cast<int>(i));
    SolveOptions o;
    o.keep_layers = false;
    o.keep_backpointers = false;
    o.target_center = x0;
    o.target_radius = grid.dx;
    const auto f = solve_metric_front(env, spec.model, grid, Point{0.0, 0.0}, 0.0, t0, o);
    rep.values[i] = f.interpolate(f.steps, x0);
  });

  rep.mean = mean(rep.values);
  rep.variance = sample_variance(rep.values);
  switch (spec.env.law) {
    case AmplitudeLaw::bounded:
    case AmplitudeLaw::periodic:
      rep.tail_case = TailCase::bounded;
      rep.C0 = 1.0 + spec.env.law_param + std::abs(spec.model.c_shift);
      break;
    case AmplitudeLaw::exponential_tail:
      rep.tail_case = TailCase::exponential;
      rep.C0 = 1.0 / spec.env.law_param;
      break;
  }
  const double q = spec.model.q;
  rep.scale = std::sqrt(t0) * phi(t0, opts.slow) *
              (std::pow(norm(x0, d), q) / std::pow(t0, q) + rep.C0 * std::log(t0));
  rep.deterministic = rep.variance == 0.0;
  if (rep.deterministic) return rep;

  for (double v : rep.values) rep.z.push_back((v - rep.mean) / rep.scale);
  if (spec.replicas < 100) return rep;

  double zmax = 0.0;
  for (double z : rep.z) zmax = std::max(zmax, std::abs(z));
  const double lmax = opts.lambda_max > 0.0 ? opts.lambda_max : zmax;
  const double M = static_cast<double>(spec.replicas);
  std::vector<double> xs, ys;
  for (int k = 1; k <= opts.lambda_points; ++k) {
    const double lam = lmax * k / opts.lambda_points;
    const auto count = std::count_if(rep.z.begin(), rep.z.end(),
                                     [&](double z) { return std::abs(z) > lam; });
    const double p = static_cast<double>(count) / M;
    rep.lambda.push_back(lam);
    rep.tail.push_back(p);
    if (p >= 5.0 / M) {
      xs.push_back(rep.tail_case == TailCase::bounded ? lam * lam : std::pow(lam, 2.0 / 3.0));
      ys.push_back(std::log(p));
    }
  }
  if (xs.size() >= 2) rep.fit = fit_line(xs, ys);
  return rep;
}

RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::function<double(double)>& deflate, const std::string& deflation_name) {
  require(xs.size() == ys.size(), "rate fit needs paired points");
  RateFit f;
  f.abscissae = xs;
  f.ordinates = ys;
  f.deflation = deflation_name;
  std::vector<double> lx, ly, ld;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(ys[i] > kRateFloor) || !(xs[i] > 0.0)) continue;
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
    if (deflate) ld.push_back(std::log(ys[i] / deflate(xs[i])));
  }
  if (lx.size() < 3) {
    f.degenerate = true;
    return f;
  }
  const auto fit = fit_line(lx, ly);
  f.slope = fit.slope;
  f.intercept = fit.intercept;
  f.residual_norm = fit.residual_norm;
  if (deflate) f.deflated_slope = fit_line(lx, ld).slope;
  if (!std::isfinite(f.slope)) throw NumericError("rate fit produced a non-finite slope");
  return f;
}

RateFit deterministic_gap(const EnsembleSpec& spec, const Point& v, const SlowVaryingParams& slow) {
  check_ladder(spec.ladder, 3);
  slow.validate();
  EnsembleSpec s = spec;
  s.velocities = {v};
  const auto samples = sample_ladder(s);
  const auto& by_rung = samples.values.front();

  RateFit probe;
  attach_rung_stats(probe, by_rung, spec.ladder);
  const auto ex = richardson_limit(probe.rung_mean, spec.ladder);
  std::vector<double> ordinates;
  for (double m : probe.rung_mean) ordinates.push_back(std::abs(m - ex.value));

  RateFit fit = fit_rate(spec.ladder, ordinates, [&](double t) { return safe_factor(psi, t, slow); }, "psi");
  fit.rung_mean = probe.rung_mean;
  fit.rung_se = probe.rung_se;
  fit.rung_variance = probe.rung_variance;
  fit.proxy = ex.value;
  fit.proxy_se = fit.rung_se.back();
  proxy_warnings(fit, ex);
  for (std::size_t r = 0; r < fit.rung_mean.size(); ++r) {
    if (fit.proxy > fit.rung_mean[r] + 2.0 * fit.rung_se[r]) fit.ordering_ok = false;
  }
  if (!fit.ordering_ok) fit.warnings.push_back("proxy exceeds a rung mean by more than 2 SE");
  return fit;
}

RateFit large_time_average_error(const EnsembleSpec& spec, double R, std::optional<double> hbar0,
                                 const SlowVaryingParams& slow) {
  spec.validate();
  check_ladder(spec.ladder, 3);
  slow.validate();
  require(R >= 0.0, "radius must be nonnegative");
  const int d = spec.grid.d;
  const double T = spec.t_max();
  const GridSpec grid = spec.padded_grid(R + spec.grid.v_cap * T, "averaging ball");
  const std::size_t nr = spec.ladder.size();
  std::vector<int> rung_step;
  for (double t : spec.ladder) rung_step.push_back(grid.steps_for(t));

  const auto zero = sample_initial_data(grid, [](const Point&) { return 0.0; });
  // ball[i][r]: u(x,t_r)/t_r over grid nodes with |x| <= R; centre[i][r]: at x = 0.
  std::vector<std::vector<std::vector<double>>> ball(spec.replicas,
                                                     std::vector<std::vector<double>>(nr));
  std::vector<std::vector<double>> centre(nr, std::vector<double>(spec.replicas));

  parallel_for(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t i) {
    const Environment env = spec.replica(static_cast<int>(i));
    SolveOptions o;
    o.keep_layers = false;
    o.keep_backpointers = false;
    o.target_center = Point{0.0, 0.0};
    o.target_radius = R + grid.dx;
    o.observer = [&](int k, const Layer& layer) {
      for (std::size_t r = 0; r < nr; ++r) {
        if (rung_step[r] != k) continue;
        const double t = spec.ladder[r];
        centre[r][i] = interpolate_layer(grid, layer, Point{0.0, 0.0}) / t;
        auto& out = ball[i][r];
        const int n = grid.nodes_per_axis();
        for (int a = 0; a < n; ++a) {
          const double xa = grid.coordinate(a);
          if (std::abs(xa) > R + 1e-12) continue;
          if (d == 1) {
            out.push_back(layer.at({a, 0}, 1) / t);
            continue;
          }
          for (int b = 0; b < n; ++b) {
            const double xb = grid.coordinate(b);
            if (std::hypot(xa, xb) > R + 1e-12) continue;
            out.push_back(layer.at({a, b}, 2) / t);
          }
        }
      }
    };
    hopf_lax_solve(env, spec.model, grid, zero, 0.0, T, o);
  });

  RateFit stats;
  attach_rung_stats(stats, centre, spec.ladder);
  std::vector<double> neg;
  for (double m : stats.rung_mean) neg.push_back(-m);
  const auto ex = richardson_limit(neg, spec.ladder);
  const double H = hbar0 ? *hbar0 : ex.value;

  std::vector<double> ordinates;
  for (std::size_t r = 0; r < nr; ++r) {
    std::vector<double> sups;
    for (int i = 0; i < spec.replicas; ++i) {
      double sup = 0.0;
      for (double u : ball[i][r]) {
        if (u == kInf) throw NumericError("averaging ball left the reachable cone");
        sup = std::max(sup, std::abs(u + H));
      }
      sups.push_back(sup);
    }
    ordinates.push_back(median(sups));
  }
  RateFit fit =
      fit_rate(spec.ladder, ordinates, [&](double t) { return safe_factor(phi_rate, t, slow); }, "phi_rate");
  fit.rung_mean = stats.rung_mean;
  fit.rung_se = stats.rung_se;
  fit.rung_variance = stats.rung_variance;
  fit.proxy = H;
  fit.proxy_se = fit.rung_se.back();
  if (!hbar0) proxy_warnings(fit, ex);
  return fit;
}

RateFit homog_error_curve(const EnsembleSpec& spec, const ConvexProfile& lbar,
                          const std::function<double(const Point&)>& g,
                          const std::vector<double>& eps_ladder, double t_fixed, double R,
                          const SlowVaryingParams& slow) {
  spec.validate();
  lbar.validate();
  slow.validate();
  require(t_fixed > 0.0, "t must be positive");
  require(R >= 0.0, "radius must be nonnegative");
  require(eps_ladder.size() >= 3, "epsilon ladder needs at least 3 values");
  for (std::size_t e = 0; e < eps_ladder.size(); ++e) {
    require(eps_ladder[e] > 0.0 && eps_ladder[e] <= 1.0, "epsilon must lie in (0,1]");
    if (e) require(eps_ladder[e] < eps_ladder[e - 1], "epsilon ladder must be decreasing");
  }
  const int d = spec.grid.d;
  const std::size_t ne = eps_ladder.size();

  struct Level {
    GridSpec micro;
    std::vector<Index> nodes;  // macro nodes with |x| <= R
    std::vector<double> ubar;
  };
  std::vector<Level> levels(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const double eps = eps_ladder[e];
    Level& L = levels[e];
    L.micro = spec.padded_grid((R + spec.grid.v_cap * t_fixed) / eps,
                               "micro grid at eps=" + std::to_string(eps));
    GridSpec macro = L.micro;
    macro.dx *= eps;
    macro.half_width *= eps;
    const int n = macro.nodes_per_axis();
    for (int a = 0; a < n; ++a) {
      const double xa = macro.coordinate(a);
      if (std::abs(xa) > R + 1e-12) continue;
      if (d == 1) {
        L.nodes.push_back({a, 0});
        L.ubar.push_back(effective_hopf_lax(lbar, g, Point{xa, 0.0}, t_fixed));
        continue;
      }
      for (int b = 0; b < n; ++b) {
        const double xb = macro.coordinate(b);
        if (std::hypot(xa, xb) > R + 1e-12) continue;
        L.nodes.push_back({a, b});
        L.ubar.push_back(effective_hopf_lax(lbar, g, Point{xa, xb}, t_fixed));
      }
    }
  }

  std::vector<std::vector<double>> err(ne, std::vector<double>(spec.replicas));
  parallel_for(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t i) {
    const Environment env = spec.replica(static_cast<int>(i));
    for (std::size_t e = 0; e < ne; ++e) {
      const double eps = eps_ladder[e];
      const Level& L = levels[e];
      SolveOptions o;
      o.keep_layers = false;
      o.keep_backpointers = false;
      o.target_center = Point{0.0, 0.0};
      o.target_radius = R / eps + L.micro.dx;
      const auto field = scaled_solution(env, spec.model, eps, L.micro, g, t_fixed, o);
      const Layer& last = field.layer(field.steps);
      double sup = 0.0;
      for (std::size_t j = 0; j < L.nodes.size(); ++j) {
        const double u = last.at(L.nodes[j], d);
        if (u == kInf) throw NumericError("homogenization ball left the reachable cone");
        sup = std::max(sup, std::abs(u - L.ubar[j]));
      }
      err[e][i] = sup;
    }
  });

  std::vector<double> ordinates;
  for (const auto& row : err) ordinates.push_back(median(row));
  RateFit fit = fit_rate(eps_ladder, ordinates,
                         [&](double eps) { return safe_factor(phi_rate, t_fixed / eps, slow); }, "phi_rate");
  for (const auto& row : err) {
    fit.rung_mean.push_back(mean(row));
    fit.rung_se.push_back(standard_error(row));
    fit.rung_variance.push_back(sample_variance(row));
  }
  return fit;
}

}  // namespace hjlab
