#include "hjlab/geometry_diag.hpp"

#include <algorithm>
#include <cmath>

#include "hjlab/errors.hpp"
#include "hjlab/parallel.hpp"
#include "hjlab/stats.hpp"

namespace hjlab {

namespace {

Point diff(const Point& a, const Point& b) { return Point{a[0] - b[0], a[1] - b[1]}; }
Point sum(const Point& a, const Point& b) { return Point{a[0] + b[0], a[1] + b[1]}; }

// Grid offsets z with |z| <= radius on a dx lattice, in ascending index order.
std::vector<Point> lattice_ball(int d, double dx, double radius) {
  std::vector<Point> out;
  const int n = static_cast<int>(std::floor(radius / dx + 1e-9));
  for (int i = -n; i <= n; ++i) {
    if (d == 1) {
      out.push_back(Point{i * dx, 0.0});
      continue;
    }
    for (int j = -n; j <= n; ++j) {
      const Point z{i * dx, j * dx};
      if (norm(z, 2) <= radius + 1e-12) out.push_back(z);
    }
  }
  return out;
}

int index_at_time(const OptimalPath& path, double t) {
  const double t0 = path.times.front();
  const double dt = path.times.size() > 1 ? path.times[1] - t0 : 1.0;
  const double k = (t - t0) / dt;
  const long kr = std::lround(k);
  if (std::abs(k - static_cast<double>(kr)) > 1e-6 || kr < 0 ||
      kr >= static_cast<long>(path.times.size())) {
    throw ValidationError("time " + std::to_string(t) + " is not a sample of the path");
  }
  return static_cast<int>(kr);
}

}  // namespace

HolderReport holder_quotients(const OptimalPath& path, const Environment& env,
                              const LagrangianModel& model, const HolderOptions& opts) {
  require(path.times.size() >= 2, "path needs at least 2 samples");
  require(opts.stride > 0.0, "stride must be positive");
  opts.slow.validate();
  const int d = env.dim();
  const double q = model.q;
  const double t0 = path.times.front();
  const double span = path.times.back() - t0;

  // Sample indices on the stride grid.
  std::vector<int> idx;
  std::vector<double> rel;
  for (int j = 0;; ++j) {
    const double r = j * opts.stride;
    if (r > span + 1e-9) break;
    idx.push_back(index_at_time(path, t0 + r));
    rel.push_back(r);
  }
  require(idx.size() >= 2, "path shorter than one stride");

  HolderReport rep;
  rep.epsilons = opts.epsilons;
  rep.holder_quotient.assign(opts.epsilons.size(), 0.0);
  const double p_exp = opts.slow.exponent();

  for (std::size_t b = 1; b < idx.size(); ++b) {
    const double tp = rel[b];
    const Point xe = path.positions[idx[b]];
    const double drift = std::pow(norm(xe, d) / tp, q);
    // sup over w in [0, s] of the nu average on [w, t'], as a running max.
    double sup_avg = 0.0;
    double w_scan = 0.0;
    for (std::size_t a = 0; a < b; ++a) {
      const double s = rel[a];
      while (w_scan <= s + 1e-12) {
        const double avg = model.nu_integral(env, t0 + w_scan, t0 + tp) / (tp - w_scan);
        sup_avg = std::max(sup_avg, avg);
        w_scan += 1.0;
      }
      const double at_s = model.nu_integral(env, t0 + s, t0 + tp) / (tp - s);
      const double A = drift + std::max(sup_avg, at_s);
      const double Aq = std::pow(A, 1.0 / q);
      const double dist = norm(diff(path.positions[idx[a]], xe), d);
      const double gap = tp - s;
      const double path_env =
          gap * std::exp(opts.slow.c1 * std::pow(std::log(tp / gap), p_exp) / q) * Aq;
      rep.path_quotient = std::max(rep.path_quotient, dist / path_env);
      const double excess = std::log(dist / (gap * Aq));
      if (dist > 0.0 && excess > 0.0) {
        const double lp = std::pow(std::log(tp / gap), p_exp);
        rep.c1_needed = lp > 0.0 ? std::max(rep.c1_needed, q * excess / lp) : kInf;
      }
      for (std::size_t e = 0; e < opts.epsilons.size(); ++e) {
        const double eps = opts.epsilons[e];
        const double h_env = std::pow(tp, eps) * std::pow(gap, 1.0 - eps) * Aq;
        rep.holder_quotient[e] = std::max(rep.holder_quotient[e], dist / h_env);
      }
      ++rep.pairs;
    }
  }
  return rep;
}

void ConeSpec::validate() const {
  require(d == 1 || d == 2, "cone dimension must be 1 or 2");
  require(t >= 1.0, "cone needs t >= 1");
  require(n >= 1.0, "cone needs n >= 1");
  require(c1 > 0.0 && q > 1.0, "cone needs c1 > 0 and q > 1");
}

double ConeSpec::opening() const {
  const double lt = std::log(t);
  const SlowVaryingParams sp{c1, q};
  return n * lt * lt * std::pow(phi(t, sp), 1.0 / q) * (norm(x, d) / t + 1.0);
}

bool cone_member(const ConeSpec& spec, const Point& y, double s) {
  spec.validate();
  if (!(s >= 1.0 && s <= spec.t)) return false;
  return norm(y, spec.d) <= spec.opening() * s;
}

double QSetOracle::ell(const Point& y, double s) const {
  return ell_y[0] * y[0] + (cone.d == 2 ? ell_y[1] * y[1] : 0.0) + ell_s * s;
}

std::pair<double, double> QSetOracle::expected(const Point& y, double s) const {
  if (!calibrated) throw ValidationError("Q-set oracle is not calibrated");
  const double k = (s - mean_field.t0) / mean_field.grid.dt;
  const long kr = std::lround(k);
  if (std::abs(k - static_cast<double>(kr)) > 1e-6 || kr < 0 || kr > mean_field.steps) {
    return {kInf, 0.0};
  }
  for (int a = 0; a < cone.d; ++a) {
    if (std::abs(y[a]) > mean_field.grid.half_width) return {kInf, 0.0};
  }
  const int layer = static_cast<int>(kr);
  const double m = mean_field.interpolate(layer, y);
  if (m == kInf) return {kInf, 0.0};
  return {m, se_field.interpolate(layer, y)};
}

QSetOracle calibrate_q_oracle(const EnsembleSpec& spec, const Point& x, double t,
                              const SlowVaryingParams& slow, const QOracleOptions& opts) {
  spec.env.validate();
  spec.model.validate();
  slow.validate();
  require(opts.replicas >= 2, "oracle calibration needs >= 2 replicas");
  require(t >= 1.0, "oracle needs t >= 1");
  const int d = spec.grid.d;
  const double H = t + 2.0;
  const GridSpec grid = spec.padded_grid(spec.grid.v_cap * H, "oracle ensemble");

  std::vector<SpaceTimeField> fronts(opts.replicas);
  parallel_for(static_cast<std::size_t>(opts.replicas), spec.workers, [&](std::size_t i) {
    const Environment env = spec.replica(static_cast<int>(i) + opts.replica_offset);
    SolveOptions so;
    so.keep_backpointers = false;
    fronts[i] = solve_metric_front(env, spec.model, grid, Point{0.0, 0.0}, 0.0, H, so);
  });

  QSetOracle o;
  o.slack_se = opts.slack_se;
  o.mean_field = fronts.front();
  o.se_field = fronts.front();
  const double M = static_cast<double>(opts.replicas);
  for (int k = 0; k <= o.mean_field.steps; ++k) {
    auto& ml = o.mean_field.layers[k].values;
    auto& sl = o.se_field.layers[k].values;
    for (std::size_t j = 0; j < ml.size(); ++j) {
      double s1 = 0.0, s2 = 0.0;
      bool finite = true;
      for (const auto& f : fronts) {
        const double v = f.layers[k].values[j];
        if (v == kInf) {
          finite = false;
          break;
        }
        s1 += v;
      }
      if (!finite) {
        ml[j] = kInf;
        sl[j] = kInf;
        continue;
      }
      const double mu = s1 / M;
      for (const auto& f : fronts) s2 += (f.layers[k].values[j] - mu) * (f.layers[k].values[j] - mu);
      ml[j] = mu;
      sl[j] = std::sqrt(s2 / (M - 1.0) / M);
    }
  }
  o.calibrated = true;

  auto lhat = [&](const Point& v) {
    const Point y{H * v[0], H * v[1]};
    return o.mean_field.interpolate(o.mean_field.steps, y) / H;
  };
  if (opts.normalize) {
    o.shift = normalizing_shift(lhat(Point{0.0, 0.0}));
    if (o.shift > 0.0) {
      for (int k = 0; k <= o.mean_field.steps; ++k) {
        const double s = o.mean_field.time(k);
        for (double& v : o.mean_field.layers[k].values) {
          if (v != kInf) v += o.shift * s;
        }
      }
    }
  }

  const Point v0{x[0] / t, x[1] / t};
  const double h = 4.0 * grid.dx / H;
  for (int a = 0; a < d; ++a) {
    Point vp = v0, vm = v0;
    vp[a] += h;
    vm[a] -= h;
    const double lp = lhat(vp), lm = lhat(vm);
    if (lp == kInf || lm == kInf) throw NumericError("oracle profile not resolved near x/t");
    o.ell_y[a] = (lp - lm) / (2.0 * h);
  }
  const double l0 = lhat(v0);
  if (l0 == kInf) throw NumericError("oracle profile not resolved at x/t");
  o.ell_s = l0 - (o.ell_y[0] * v0[0] + (d == 2 ? o.ell_y[1] * v0[1] : 0.0));
  o.mbar = o.ell(x, t);
  o.mbar_se = t * o.se_field.interpolate(o.se_field.steps, Point{H * v0[0], H * v0[1]}) / H;

  o.cone = ConeSpec{d, x, t, 1.0, slow.c1, spec.model.q};
  o.gap = std::sqrt(t) * std::pow(phi(t, slow), 3.0) * big_lambda(norm(x, d), t, spec.model.q);
  return o;
}

bool q_member(const QSetOracle& oracle, const Point& y, double s) {
  if (!oracle.calibrated) throw ValidationError("Q-set oracle is not calibrated");
  if (!cone_member(oracle.cone, y, s)) return false;
  const double l = oracle.ell(y, s);
  if (l > oracle.mbar + oracle.slack_se * oracle.mbar_se) return false;
  const auto [em, se] = oracle.expected(y, s);
  if (em == kInf) return false;
  return em <= l + oracle.gap + oracle.slack_se * se;
}

std::string to_string(IncrementFlag f) {
  switch (f) {
    case IncrementFlag::none: return "none";
    case IncrementFlag::E: return "E";
    case IncrementFlag::L: return "L";
    case IncrementFlag::S: return "S";
  }
  return "?";
}

Skeleton extract_good_skeleton(const OptimalPath& path, const QSetOracle& oracle, const Point& x,
                               double t, double n) {
  require(oracle.calibrated, "Q-set oracle is not calibrated");
  require(n >= 1.0 && t >= 1.0, "skeleton needs n >= 1 and t >= 1");
  require(path.times.size() >= 2, "path needs at least 2 samples");
  const int d = oracle.cone.d;
  const double nt = n * t;
  const double dx = oracle.mean_field.grid.dx;
  if (std::abs(path.times.front()) > 1e-9 || std::abs(path.times.back() - nt) > 1e-6) {
    throw ValidationError("path must span [0, n t]");
  }
  const Point target{n * x[0], n * x[1]};
  if (norm(diff(path.positions.back(), target), d) > dx + 1e-9) {
    throw ValidationError("endpoint mismatch: path does not reach (n x, n t) within dx");
  }

  const int count = static_cast<int>(std::floor(nt + 1e-9));
  std::vector<double> ti(count + 1);
  ti[0] = 0.0;
  for (int i = 1; i <= count; ++i) ti[i] = nt - count + i;
  auto at = [&](double s) { return path.positions[index_at_time(path, s)]; };

  Skeleton sk;
  sk.n = n;
  sk.vertices.push_back(Point{0.0, 0.0});
  sk.times.push_back(0.0);
  double sj = 0.0;
  Point vj{0.0, 0.0};
  while (sj < nt - 1e-9) {
    double next = nt;
    int first_exit = -1;
    for (int i = 1; i <= count; ++i) {
      if (ti[i] <= sj + 1e-9) continue;
      if (!q_member(oracle, diff(at(ti[i]), vj), ti[i] - sj)) {
        first_exit = i;
        break;
      }
    }
    if (first_exit >= 0) next = std::min(ti[first_exit] - 1.0, nt);
    if (next <= sj + 1e-9) {
      next = ti[first_exit];
      if (sk.good) sk.demotion = "increment from s=" + std::to_string(sj) + " leaves Q at once";
      sk.good = false;
    }
    const Point vn = next >= nt - 1e-9 ? at(nt) : at(next);
    sk.vertices.push_back(vn);
    sk.times.push_back(next);
    sj = next;
    vj = vn;
  }

  const int k = sk.k();
  sk.in_q.resize(k);
  sk.witness.resize(k);
  const double open = oracle.cone.opening();
  const auto F = lattice_ball(d, dx, open);
  for (int j = 1; j <= k; ++j) {
    const Point y = diff(sk.vertices[j], sk.vertices[j - 1]);
    const double s = sk.times[j] - sk.times[j - 1];
    sk.in_q[j - 1] = q_member(oracle, y, s);
    if (!sk.in_q[j - 1] && sk.good) {
      sk.good = false;
      sk.demotion = "increment " + std::to_string(j) + " is not in Q";
    }
    if (j == k) continue;
    for (const auto& z : F) {
      const Point w = sum(y, z);
      if (norm(w, d) <= (s + 1.0) * open && !q_member(oracle, w, s + 1.0)) {
        sk.witness[j - 1] = z;
        break;
      }
    }
    if (!sk.witness[j - 1] && sk.good) {
      sk.good = false;
      sk.demotion = "no F witness for increment " + std::to_string(j);
    }
  }
  return sk;
}

SkeletonCensus skeleton_census(Skeleton& skel, const Point& x, double t, double n,
                               const QSetOracle& oracle) {
  require(oracle.calibrated, "Q-set oracle is not calibrated");
  const int d = oracle.cone.d;
  const double dx = oracle.mean_field.grid.dx;
  const double open = oracle.cone.opening();
  const auto F = lattice_ball(d, dx, open);
  const double s_threshold =
      std::sqrt(t) * phi(t, SlowVaryingParams{oracle.cone.c1, oracle.cone.q}) *
      big_lambda(norm(x, d), t, oracle.cone.q);

  SkeletonCensus c;
  c.k = skel.k();
  for (int j = 1; j <= c.k; ++j) {
    const Point y = diff(skel.vertices[j], skel.vertices[j - 1]);
    const double s = skel.times[j] - skel.times[j - 1];
    c.inefficiency.push_back(oracle.inefficiency(y, s));
    IncrementFlag flag = IncrementFlag::none;
    if (s >= t - 1.0) {
      flag = IncrementFlag::E;
    } else {
      for (const auto& z : F) {
        if (oracle.ell(sum(y, z), s + 1.0) > oracle.mbar) {
          flag = IncrementFlag::L;
          break;
        }
      }
      if (flag == IncrementFlag::none) {
        for (const auto& z : F) {
          const double e = oracle.inefficiency(sum(y, z), s + 1.0);
          if (std::isfinite(e) && e >= s_threshold) {
            flag = IncrementFlag::S;
            break;
          }
        }
      }
    }
    switch (flag) {
      case IncrementFlag::E: ++c.count_E; break;
      case IncrementFlag::L: ++c.count_L; break;
      case IncrementFlag::S: ++c.count_S; break;
      case IncrementFlag::none: ++c.count_none; break;
    }
    c.flags.push_back(flag);
  }
  skel.flags = c.flags;
  c.k_within_10n = c.k <= 10.0 * n;
  c.e_within_2n = c.count_E <= 2.0 * n;
  return c;
}

URegularityReport u_regularity_check(const SpaceTimeField& field, const Environment& env,
                                     const LagrangianModel& model, const URegularityOptions& opts) {
  require(opts.layer_stride >= 1, "layer stride must be positive");
  opts.slow.validate();
  const GridSpec& g = field.grid;
  const int d = g.d;
  const double q = model.q;
  const double t0 = field.t0;
  URegularityReport rep;
  rep.tau_quad = field.tau_quad;

  auto sup_avg_before = [&](double cut, double t) {
    // sup over w <= cut of the nu average on [max(w,0), t] (relative times).
    if (cut <= 0.0) return model.nu_integral(env, t0, t0 + t) / t;
    double best = 0.0;
    for (double w = 0.0; w < cut; w += 1.0)
      best = std::max(best, model.nu_integral(env, t0 + w, t0 + t) / (t - w));
    return std::max(best, model.nu_integral(env, t0 + cut, t0 + t) / (t - cut));
  };
  auto frak_q = [&](double t) { return 4.0 * model.N1 * model.nu_integral(env, t0, t0 + t) / t; };

  std::vector<int> kept;
  for (int k = 0; k <= field.steps; ++k) {
    if (!field.layers[k].values.empty()) kept.push_back(k);
  }

  // Space modulus along axes at dyadic separations.
  for (int k : kept) {
    if (k == 0 || k % opts.layer_stride != 0) continue;
    const double t = field.time(k) - t0;
    const Layer& l = field.layers[k];
    const double cq = frak_q(t);
    for (int h = 1; h <= g.nodes_per_axis() / 2; h *= 2) {
      const double dist = h * g.dx;
      const double ph = phi((t + dist) / dist, opts.slow);
      const double tau = dist * ph;
      const double env_val = dist * ph * (cq + sup_avg_before(t - tau, t));
      for (int axis = 0; axis < d; ++axis) {
        for (int i = l.lo[0]; i <= l.hi[0]; ++i) {
          for (int j = l.lo[1]; j <= (d == 1 ? l.lo[1] : l.hi[1]); ++j) {
            Index a{i, j}, b{i, j};
            b[axis] += h;
            const double ua = l.at(a, d), ub = l.at(b, d);
            if (ua == kInf || ub == kInf) continue;
            rep.space_quotient = std::max(rep.space_quotient, std::abs(ua - ub) / env_val);
            ++rep.space_pairs;
          }
        }
      }
    }
  }

  // One-sided time bound on consecutive stored layers plus the upper modulus.
  for (std::size_t a = 0; a + 1 < kept.size(); ++a) {
    const int ks = kept[a], kt = kept[a + 1];
    const double s = field.time(ks) - t0, t = field.time(kt) - t0;
    const double nu = model.nu_integral(env, t0 + s, t0 + t);
    const Layer& ls = field.layers[ks];
    const Layer& lt = field.layers[kt];
    double up_env = kInf;
    if (s > 0.0) {
      const double ph = phi(t / (t - s), opts.slow);
      const double tau = (t - s) * ph;
      up_env = (t - s) * ph * std::pow(t / s, q - 1.0) * (frak_q(t) + sup_avg_before(t - tau, t));
    }
    for (int i = lt.lo[0]; i <= lt.hi[0]; ++i) {
      for (int j = lt.lo[1]; j <= (d == 1 ? lt.lo[1] : lt.hi[1]); ++j) {
        const Index idx{i, j};
        const double us = ls.at(idx, d), ut = lt.at(idx, d);
        if (us == kInf || ut == kInf) continue;
        ++rep.time_checks;
        const double excess = -nu - (us - ut);
        if (excess > rep.tau_quad) {
          ++rep.time_violations;
          rep.worst_time_violation = std::max(rep.worst_time_violation, excess);
        }
        if (up_env != kInf) rep.time_quotient = std::max(rep.time_quotient, (us - ut) / up_env);
      }
    }
  }
  return rep;
}

}  // namespace hjlab
