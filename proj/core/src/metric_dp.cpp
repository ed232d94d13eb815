#include "hjlab/metric_dp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "hjlab/errors.hpp"
#include "hjlab/parallel.hpp"

namespace hjlab {

namespace {

constexpr double kGridTol = 1e-9;

bool near_integer(double v) { return std::abs(v - std::round(v)) < kGridTol * std::max(1.0, std::abs(v)); }

std::string fmt_point(const Point& x, int d) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
  os << ')';
  return os.str();
}

std::vector<Index> make_offsets(const GridSpec& grid) {
  const int w = grid.window();
  std::vector<Index> offs;
  if (grid.d == 1) {
    for (int o = w; o >= -w; --o) offs.push_back({o, 0});
  } else {
    const double r = grid.v_cap * grid.dt / grid.dx;
    const double r2 = r * r * (1.0 + kGridTol) + kGridTol;
    for (int oi = w; oi >= -w; --oi) {
      for (int oj = w; oj >= -w; --oj) {
        if (oi * oi + oj * oj <= r2) offs.push_back({oi, oj});
      }
    }
  }
  if (offs.size() > 65535) throw ValidationError("velocity window too large for backpointers");
  return offs;
}

double offset_speed(const GridSpec& grid, const Index& o) {
  const double n2 = static_cast<double>(o[0]) * o[0] + (grid.d == 2 ? static_cast<double>(o[1]) * o[1] : 0.0);
  return std::sqrt(n2) * grid.dx / grid.dt;
}

// Node index range per axis that can still reach the target ball.
void clip_to_target(const GridSpec& grid, const SolveOptions& opts, double remaining, Index& lo,
                    Index& hi) {
  if (!opts.target_center) return;
  const double r = opts.target_radius + grid.v_cap * remaining + kGridTol;
  for (int a = 0; a < grid.d; ++a) {
    const double c = (*opts.target_center)[a];
    const int first = static_cast<int>(std::ceil((c - r + grid.half_width) / grid.dx - 1e-7));
    const int last = static_cast<int>(std::floor((c + r + grid.half_width) / grid.dx + 1e-7));
    lo[a] = std::max(lo[a], first);
    hi[a] = std::min(hi[a], last);
  }
}

bool box_empty(const Index& lo, const Index& hi, int d) {
  for (int a = 0; a < d; ++a) {
    if (lo[a] > hi[a]) return true;
  }
  return false;
}

std::size_t box_size(const Index& lo, const Index& hi, int d) {
  if (box_empty(lo, hi, d)) return 0;
  std::size_t n = 1;
  for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
  return n;
}

struct HalfGrid {
  Index lo{0, 0};
  Index hi{-1, -1};
  std::vector<double> a;
  std::vector<double> V;

  std::size_t local(int h0, int h1, int d) const {
    if (d == 1) return static_cast<std::size_t>(h0 - lo[0]);
    return static_cast<std::size_t>(h0 - lo[0]) * static_cast<std::size_t>(hi[1] - lo[1] + 1) +
           static_cast<std::size_t>(h1 - lo[1]);
  }
};

void fill_half_grid(const Environment& env, const GridSpec& grid, double t_mid, HalfGrid& hg) {
  const std::size_t n = box_size(hg.lo, hg.hi, grid.d);
  hg.a.resize(n);
  hg.V.resize(n);
  const double half = grid.dx / 2.0;
  auto store = [&](std::size_t slot, const Point& x) {
    const auto f = env.sample(x, t_mid);
    if (!std::isfinite(f.V) || !std::isfinite(f.a)) {
      throw NumericError("non-finite Lagrangian sample at x=" + fmt_point(x, grid.d) +
                         " t=" + std::to_string(t_mid));
    }
    hg.a[slot] = f.a;
    hg.V[slot] = f.V;
  };
  if (grid.d == 1) {
    for (int h = hg.lo[0]; h <= hg.hi[0]; ++h) {
      store(static_cast<std::size_t>(h - hg.lo[0]), Point{-grid.half_width + h * half, 0.0});
    }
  } else {
    std::size_t slot = 0;
    for (int h0 = hg.lo[0]; h0 <= hg.hi[0]; ++h0) {
      for (int h1 = hg.lo[1]; h1 <= hg.hi[1]; ++h1) {
        store(slot++, Point{-grid.half_width + h0 * half, -grid.half_width + h1 * half});
      }
    }
  }
}

SpaceTimeField run_bellman(const Environment& env, const LagrangianModel& model,
                           const GridSpec& grid, double t0, int steps, Layer init,
                           const SolveOptions& opts, FieldKind kind) {
  grid.validate();
  model.validate();
  require(grid.d == env.dim(), "grid and environment dimensions differ");
  require(steps >= 0, "negative step count");
  require(near_integer(t0 * grid.steps_per_unit()), "start time must lie on the time grid");
  const double t_end = t0 + steps * grid.dt;
  if (t0 < 0.0 || t_end > env.horizon() + kGridTol) {
    throw ValidationError("solver horizon [" + std::to_string(t0) + "," + std::to_string(t_end) +
                          "] exceeds environment slab_count " +
                          std::to_string(env.spec().slab_count));
  }

  const int d = grid.d;
  const int n_axis = grid.nodes_per_axis();
  const int w = grid.window();

  SpaceTimeField field;
  field.kind = kind;
  field.grid = grid;
  field.t0 = t0;
  field.steps = steps;
  field.tau_quad = quadrature_tolerance(grid);
  field.offsets = make_offsets(grid);
  const auto& offs = field.offsets;

  std::vector<double> kin(offs.size());
  for (std::size_t o = 0; o < offs.size(); ++o) {
    kin[o] = std::pow(offset_speed(grid, offs[o]), model.q) / model.q;
  }

  {
    Index lo = init.lo, hi = init.hi;
    clip_to_target(grid, opts, steps * grid.dt, lo, hi);
    if (lo != init.lo || hi != init.hi) {
      // Shrink the initial box to the target cone.
      Layer shrunk;
      shrunk.lo = lo;
      shrunk.hi = hi;
      shrunk.values.assign(box_size(lo, hi, d), kInf);
      if (!box_empty(lo, hi, d)) {
        if (d == 1) {
          for (int i = lo[0]; i <= hi[0]; ++i) shrunk.values[i - lo[0]] = init.at({i, 0}, d);
        } else {
          std::size_t s = 0;
          for (int i = lo[0]; i <= hi[0]; ++i)
            for (int j = lo[1]; j <= hi[1]; ++j) shrunk.values[s++] = init.at({i, j}, d);
        }
      }
      init = std::move(shrunk);
    }
  }
  if (opts.keep_backpointers) init.back.assign(init.values.size(), 0);

  field.layers.resize(steps + 1);
  if (opts.observer) opts.observer(0, init);
  Layer prev = std::move(init);
  if (opts.keep_layers || steps == 0) field.layers[0] = prev;

  HalfGrid hg;
  const double cs = model.c_shift;
  const double dt = grid.dt;

  for (int k = 0; k < steps; ++k) {
    Layer next;
    for (int a = 0; a < kMaxDim; ++a) {
      next.lo[a] = a < d ? std::max(0, prev.lo[a] - w) : 0;
      next.hi[a] = a < d ? std::min(n_axis - 1, prev.hi[a] + w) : -1;
    }
    if (d == 1) next.hi[1] = 0, next.lo[1] = 0;
    if (box_empty(prev.lo, prev.hi, d)) next.hi = {-1, -1}, next.lo = {0, 0};
    clip_to_target(grid, opts, (steps - k - 1) * dt, next.lo, next.hi);
    const std::size_t n_next = box_size(next.lo, next.hi, d);
    next.values.assign(n_next, kInf);
    if (opts.keep_backpointers) next.back.assign(n_next, 0);

    if (n_next > 0) {
      const double t_mid = t0 + (k + 0.5) * dt;
      for (int a = 0; a < d; ++a) {
        hg.lo[a] = next.lo[a] + prev.lo[a];
        hg.hi[a] = next.hi[a] + prev.hi[a];
      }
      if (d == 1) hg.lo[1] = 0, hg.hi[1] = 0;
      fill_half_grid(env, grid, t_mid, hg);

      const int rows = next.hi[0] - next.lo[0] + 1;
      auto do_row = [&](std::size_t r) {
        const int i = next.lo[0] + static_cast<int>(r);
        if (d == 1) {
          double best = kInf;
          std::uint16_t arg = 0;
          for (std::size_t o = 0; o < offs.size(); ++o) {
            const int j = i - offs[o][0];
            if (j < prev.lo[0] || j > prev.hi[0]) continue;
            const double base = prev.values[j - prev.lo[0]];
            if (base == kInf) continue;
            const std::size_t h = static_cast<std::size_t>(i + j - hg.lo[0]);
            const double c = base + dt * (hg.a[h] * kin[o] + hg.V[h] + cs);
            if (c < best) {
              best = c;
              arg = static_cast<std::uint16_t>(o);
            }
          }
          next.values[r] = best;
          if (!next.back.empty()) next.back[r] = arg;
          return;
        }
        const int cols = next.hi[1] - next.lo[1] + 1;
        for (int jj = 0; jj < cols; ++jj) {
          const int i1 = next.lo[1] + jj;
          double best = kInf;
          std::uint16_t arg = 0;
          for (std::size_t o = 0; o < offs.size(); ++o) {
            const int j0 = i - offs[o][0];
            const int j1 = i1 - offs[o][1];
            if (j0 < prev.lo[0] || j0 > prev.hi[0] || j1 < prev.lo[1] || j1 > prev.hi[1]) continue;
            const double base = prev.values[prev.local({j0, j1}, 2)];
            if (base == kInf) continue;
            const std::size_t h = hg.local(i + j0, i1 + j1, 2);
            const double c = base + dt * (hg.a[h] * kin[o] + hg.V[h] + cs);
            if (c < best) {
              best = c;
              arg = static_cast<std::uint16_t>(o);
            }
          }
          const std::size_t slot = r * static_cast<std::size_t>(cols) + jj;
          next.values[slot] = best;
          if (!next.back.empty()) next.back[slot] = arg;
        }
      };
      const int workers = (opts.workers > 1 && n_next > 4096) ? opts.workers : 1;
      parallel_for(static_cast<std::size_t>(rows), workers, do_row);
    }

    if (opts.observer) opts.observer(k + 1, next);
    if (opts.keep_layers || k + 1 == steps) field.layers[k + 1] = next;
    prev = std::move(next);
  }
  return field;
}

}  // namespace

void GridSpec::validate() const {
  if (d >= 3) throw ValidationError("grid dimension >= 3 is not supported");
  require(d == 1 || d == 2, "grid dimension must be 1 or 2");
  require(std::isfinite(dx) && dx > 0.0, "dx must be positive");
  require(std::isfinite(dt) && dt > 0.0 && dt <= 1.0, "dt must lie in (0,1]");
  require(near_integer(1.0 / dt), "1/dt must be an integer so slab boundaries align");
  require(std::isfinite(half_width) && half_width > 0.0, "half_width must be positive");
  require(near_integer(2.0 * half_width / dx), "2 * half_width must be a multiple of dx");
  require(std::isfinite(v_cap) && v_cap * dt >= dx * (1.0 - kGridTol),
          "v_cap * dt must be at least dx");
}

int GridSpec::nodes_per_axis() const {
  return static_cast<int>(std::llround(2.0 * half_width / dx)) + 1;
}

std::size_t GridSpec::node_count() const {
  const auto n = static_cast<std::size_t>(nodes_per_axis());
  return d == 1 ? n : n * n;
}

int GridSpec::steps_per_unit() const { return static_cast<int>(std::llround(1.0 / dt)); }

int GridSpec::window() const {
  return static_cast<int>(std::floor(v_cap * dt / dx + kGridTol));
}

Index GridSpec::snap(const Point& x) const {
  Index idx{0, 0};
  const int n = nodes_per_axis();
  for (int a = 0; a < d; ++a) {
    const double u = (x[a] + half_width) / dx;
    const long i = std::lround(u);
    if (std::abs(u - static_cast<double>(i)) > 1e-6 || i < 0 || i >= n) {
      throw ValidationError("point " + fmt_point(x, d) + " is not a grid node");
    }
    idx[a] = static_cast<int>(i);
  }
  return idx;
}

bool GridSpec::on_grid(const Point& x) const {
  try {
    snap(x);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

Point GridSpec::position(const Index& idx) const {
  Point p{0.0, 0.0};
  for (int a = 0; a < d; ++a) p[a] = coordinate(idx[a]);
  return p;
}

int GridSpec::steps_for(double duration) const {
  const double s = duration / dt;
  require(duration >= 0.0 && near_integer(s), "duration must be a multiple of dt");
  return static_cast<int>(std::llround(s));
}

void GridSpec::require_padding(const Point& x, double duration) const {
  for (int a = 0; a < d; ++a) {
    if (std::abs(x[a]) + v_cap * duration > half_width * (1.0 + kGridTol)) {
      throw ValidationError("grid padding violated: need half_width >= |x| + v_cap * T = " +
                            std::to_string(std::abs(x[a]) + v_cap * duration));
    }
  }
}

double default_v_cap(const LagrangianModel& model, const Environment& env, double t0, double t1) {
  const double nu = env.nu_max(t0, t1) + std::abs(model.c_shift);
  return 2.0 * std::pow(4.0 * model.N1 * nu, 1.0 / model.q);
}

double quadrature_tolerance(const GridSpec& grid) { return grid.dx + grid.dt; }

bool Layer::contains(const Index& idx, int d) const {
  for (int a = 0; a < d; ++a) {
    if (idx[a] < lo[a] || idx[a] > hi[a]) return false;
  }
  return true;
}

std::size_t Layer::local(const Index& idx, int d) const {
  if (d == 1) return static_cast<std::size_t>(idx[0] - lo[0]);
  return static_cast<std::size_t>(idx[0] - lo[0]) * static_cast<std::size_t>(hi[1] - lo[1] + 1) +
         static_cast<std::size_t>(idx[1] - lo[1]);
}

double Layer::at(const Index& idx, int d) const {
  if (values.empty() || !contains(idx, d)) return kInf;
  return values[local(idx, d)];
}

int SpaceTimeField::layer_of(double t) const {
  const double k = (t - t0) / grid.dt;
  const long kr = std::lround(k);
  if (std::abs(k - static_cast<double>(kr)) > 1e-6 || kr < 0 || kr > steps) {
    throw ValidationError("time " + std::to_string(t) + " is not a layer of this field");
  }
  return static_cast<int>(kr);
}

const Layer& SpaceTimeField::layer(int k) const {
  require(k >= 0 && k <= steps, "layer index out of range");
  const Layer& l = layers[k];
  require(!l.values.empty() || box_empty(l.lo, l.hi, grid.d) || k == 0,
          "layer " + std::to_string(k) + " was not kept");
  if (l.values.empty() && !box_empty(l.lo, l.hi, grid.d)) {
    throw ValidationError("layer " + std::to_string(k) + " was not kept");
  }
  return l;
}

bool SpaceTimeField::has_backpointers() const {
  return !layers.empty() && !layers.back().back.empty();
}

double SpaceTimeField::value(int k, const Index& idx) const { return layer(k).at(idx, grid.d); }

double SpaceTimeField::value_at(int k, const Point& x) const { return value(k, grid.snap(x)); }

double interpolate_layer(const GridSpec& grid, const Layer& l, const Point& x) {
  const int n = grid.nodes_per_axis();
  Index base{0, 0};
  std::array<double, kMaxDim> frac{0.0, 0.0};
  for (int a = 0; a < grid.d; ++a) {
    const double u = (x[a] + grid.half_width) / grid.dx;
    const long r = std::lround(u);
    if (std::abs(u - static_cast<double>(r)) < 1e-9) {
      base[a] = static_cast<int>(r);
      frac[a] = 0.0;
    } else {
      base[a] = static_cast<int>(std::floor(u));
      frac[a] = u - base[a];
    }
    if (base[a] < 0 || base[a] >= n || (frac[a] > 0.0 && base[a] + 1 >= n)) return kInf;
  }
  if (grid.d == 1) {
    const double v0 = l.at(base, 1);
    if (frac[0] == 0.0) return v0;
    const double v1 = l.at({base[0] + 1, 0}, 1);
    if (v0 == kInf || v1 == kInf) return kInf;
    return (1.0 - frac[0]) * v0 + frac[0] * v1;
  }
  double acc = 0.0;
  for (int di = 0; di <= 1; ++di) {
    for (int dj = 0; dj <= 1; ++dj) {
      const double wgt = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]);
      if (wgt == 0.0) continue;
      const double v = l.at({base[0] + di, base[1] + dj}, 2);
      if (v == kInf) return kInf;
      acc += wgt * v;
    }
  }
  return acc;
}

double SpaceTimeField::interpolate(int k, const Point& x) const {
  return interpolate_layer(grid, layer(k), x);
}

MetricField solve_metric_front(const Environment& env, const LagrangianModel& model,
                               const GridSpec& grid, const Point& origin, double t_origin,
                               double duration, const SolveOptions& opts) {
  grid.validate();
  const int steps = grid.steps_for(duration);
  grid.require_padding(origin, duration);
  Layer init;
  const Index o = grid.snap(origin);
  init.lo = o;
  init.hi = o;
  if (grid.d == 1) init.lo[1] = init.hi[1] = 0;
  init.values = {0.0};
  auto field = run_bellman(env, model, grid, t_origin, steps, std::move(init), opts, FieldKind::metric);
  field.origin = origin;
  return field;
}

double point_metric(const Environment& env, const LagrangianModel& model, const GridSpec& grid,
                    const Point& x1, double t1, const Point& x2, double t2, int workers) {
  if (t1 == t2 && x1 == x2) return 0.0;
  require(t2 > t1, "point_metric needs t2 > t1");
  SolveOptions opts;
  opts.keep_layers = false;
  opts.keep_backpointers = false;
  opts.workers = workers;
  opts.target_center = x2;
  opts.target_radius = grid.dx;
  const auto field = solve_metric_front(env, model, grid, x1, t1, t2 - t1, opts);
  return field.interpolate(field.steps, x2);
}

OptimalPath backtrace_path(const MetricField& field, int k, const Point& endpoint) {
  require(field.has_backpointers(), "field was solved without backpointers");
  require(k >= 0 && k <= field.steps, "endpoint layer out of range");
  const int d = field.grid.d;
  Index idx = field.grid.snap(endpoint);
  const double v = field.value(k, idx);
  if (v == kInf) throw UnreachableError("endpoint " + fmt_point(endpoint, d) + " is unreachable");
  OptimalPath path;
  path.value = v;
  path.times.resize(k + 1);
  path.positions.resize(k + 1);
  for (int kk = k; kk >= 0; --kk) {
    path.times[kk] = field.time(kk);
    path.positions[kk] = field.grid.position(idx);
    if (kk == 0) break;
    const Layer& l = field.layer(kk);
    const Index& off = field.offsets[l.back[l.local(idx, d)]];
    for (int a = 0; a < d; ++a) idx[a] -= off[a];
  }
  return path;
}

double path_action(const Environment& env, const LagrangianModel& model, const OptimalPath& path) {
  require(path.times.size() == path.positions.size(), "malformed path");
  const int d = env.dim();
  double total = 0.0;
  for (std::size_t k = 1; k < path.times.size(); ++k) {
    const double dt = path.times[k] - path.times[k - 1];
    Point mid{0.0, 0.0};
    double speed2 = 0.0;
    for (int a = 0; a < d; ++a) {
      mid[a] = 0.5 * (path.positions[k][a] + path.positions[k - 1][a]);
      const double vel = (path.positions[k][a] - path.positions[k - 1][a]) / dt;
      speed2 += vel * vel;
    }
    const auto f = env.sample(mid, 0.5 * (path.times[k] + path.times[k - 1]));
    const double kin = std::pow(std::sqrt(speed2), model.q) / model.q;
    total += dt * (f.a * kin + f.V + model.c_shift);
  }
  return total;
}

std::vector<double> sample_initial_data(const GridSpec& grid,
                                        const std::function<double(const Point&)>& g) {
  grid.validate();
  const int n = grid.nodes_per_axis();
  std::vector<double> out;
  out.reserve(grid.node_count());
  if (grid.d == 1) {
    for (int i = 0; i < n; ++i) out.push_back(g(Point{grid.coordinate(i), 0.0}));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.push_back(g(Point{grid.coordinate(i), grid.coordinate(j)}));
  }
  return out;
}

SolutionField hopf_lax_solve(const Environment& env, const LagrangianModel& model,
                             const GridSpec& grid, const std::vector<double>& initial,
                             double t0, double duration, const SolveOptions& opts) {
  grid.validate();
  require(initial.size() == grid.node_count(), "initial data size does not match the grid");
  const int n = grid.nodes_per_axis();
  const int d = grid.d;
  Index lo{n, d == 1 ? 0 : n}, hi{-1, d == 1 ? 0 : -1};
  for (std::size_t s = 0; s < initial.size(); ++s) {
    const double g = initial[s];
    if (std::isnan(g) || g == -kInf) {
      throw ValidationError("initial data must be finite or +inf (unbounded-below data rejected)");
    }
    if (g == kInf) continue;
    const Index idx = d == 1 ? Index{static_cast<int>(s), 0}
                             : Index{static_cast<int>(s / n), static_cast<int>(s % n)};
    for (int a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], idx[a]);
      hi[a] = std::max(hi[a], idx[a]);
    }
  }
  Layer init;
  double lip = 0.0;
  if (!box_empty(lo, hi, d)) {
    init.lo = lo;
    init.hi = hi;
    init.values.resize(box_size(lo, hi, d));
    auto flat = [&](int i, int j) { return d == 1 ? initial[i] : initial[static_cast<std::size_t>(i) * n + j]; };
    if (d == 1) {
      for (int i = lo[0]; i <= hi[0]; ++i) {
        init.values[i - lo[0]] = flat(i, 0);
        if (i > lo[0] && flat(i, 0) != kInf && flat(i - 1, 0) != kInf)
          lip = std::max(lip, std::abs(flat(i, 0) - flat(i - 1, 0)) / grid.dx);
      }
    } else {
      std::size_t s = 0;
      for (int i = lo[0]; i <= hi[0]; ++i) {
        for (int j = lo[1]; j <= hi[1]; ++j) {
          init.values[s++] = flat(i, j);
          if (flat(i, j) == kInf) continue;
          if (i > lo[0] && flat(i - 1, j) != kInf)
            lip = std::max(lip, std::abs(flat(i, j) - flat(i - 1, j)) / grid.dx);
          if (j > lo[1] && flat(i, j - 1) != kInf)
            lip = std::max(lip, std::abs(flat(i, j) - flat(i, j - 1)) / grid.dx);
        }
      }
    }
  }
  auto field = run_bellman(env, model, grid, t0, grid.steps_for(duration), std::move(init), opts,
                           FieldKind::solution);
  field.lipschitz_bound = lip;
  return field;
}

SolutionField scaled_solution(const Environment& env, const LagrangianModel& model, double eps,
                              const GridSpec& micro, const std::function<double(const Point&)>& g,
                              double t_macro, const SolveOptions& opts) {
  require(eps > 0.0 && eps <= 1.0, "eps must lie in (0,1]");
  require(t_macro > 0.0, "macroscopic time must be positive");
  micro.validate();
  const double horizon = t_macro / eps;
  require(near_integer(horizon / micro.dt),
          "t/eps must be a multiple of the microscopic time step");
  if (horizon > env.horizon() + kGridTol) {
    throw ValidationError("micro horizon t/eps = " + std::to_string(horizon) +
                          " exceeds environment slab_count");
  }
  auto g_micro = [&](const Point& y) {
    Point x = y;
    for (int a = 0; a < micro.d; ++a) x[a] = eps * y[a];
    return g(x) / eps;
  };
  auto field = hopf_lax_solve(env, model, micro, sample_initial_data(micro, g_micro), 0.0,
                              horizon, opts);
  field.grid.dx *= eps;
  field.grid.dt *= eps;
  field.grid.half_width *= eps;
  field.tau_quad *= eps;
  for (auto& l : field.layers) {
    for (double& v : l.values) {
      if (v != kInf) v *= eps;
    }
  }
  return field;
}

double effective_hopf_lax(const ConvexProfile& lbar, const std::function<double(const Point&)>& g,
                          const Point& x, double t) {
  lbar.validate();
  require(t > 0.0, "effective_hopf_lax needs t > 0");
  double best = kInf;
  for (std::size_t i = 0; i < lbar.size(); ++i) {
    Point y = x;
    for (int a = 0; a < lbar.dim; ++a) y[a] = x[a] - t * lbar.coords[i * lbar.dim + a];
    best = std::min(best, g(y) + t * lbar.values[i]);
  }
  return best;
}

}  // namespace hjlab
