#include "hjlab/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "hjlab/errors.hpp"

namespace hjlab {

void LagrangianModel::validate() const {
  require(std::isfinite(q) && q > 1.0, "model exponent q must be > 1");
  require(std::isfinite(N1) && N1 > 1.0, "model constant N1 must be > 1");
  require(std::isfinite(c_shift), "model shift must be finite");
}

double LagrangianModel::eval(const Environment& env, const Point& x, double t,
                             const Point& v) const {
  const auto f = env.sample(x, t);
  const double speed = norm(v, env.dim());
  return f.a * std::pow(speed, q) / q + f.V + c_shift;
}

double LagrangianModel::nu_at(const Environment& env, double t) const {
  return env.nu_at(t) + std::abs(c_shift);
}

double LagrangianModel::nu_integral(const Environment& env, double s, double t) const {
  return env.nu_integral(s, t) + std::abs(c_shift) * (t - s);
}

double admissible_N1(const EnvironmentSpec& spec, double q) {
  return std::max({q / spec.a_min, spec.a_max / q, 1.0 + 1e-12});
}

double normalizing_shift(double lbar_at_zero) { return std::max(0.0, 1.0 - lbar_at_zero); }

A2Report verify_a2(const LagrangianModel& model, const Environment& env, const A2Options& opts) {
  model.validate();
  require(opts.n_samples >= 1, "verify_a2 needs at least one sample");
  const int d = env.dim();
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> ux(-opts.x_extent, opts.x_extent);
  std::uniform_real_distribution<double> ut(0.0, env.horizon());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto nu = [&](double t) {
    return opts.nu_override ? opts.nu_override(t) : model.nu_at(env, t);
  };
  auto draw_v = [&](std::size_t i) {
    Point v{0.0, 0.0};
    if (i % 10 == 0) return v;  // keep v = 0 in the sample set
    double r = 0.0;
    for (int k = 0; k < d; ++k) {
      v[k] = gauss(rng);
      r += v[k] * v[k];
    }
    r = std::sqrt(r);
    const double radius = opts.v_extent * std::pow(unit(rng), 1.0 / d);
    for (int k = 0; k < d; ++k) v[k] *= r > 0.0 ? radius / r : 0.0;
    return v;
  };
  auto draw_x = [&] {
    Point x{0.0, 0.0};
    for (int k = 0; k < d; ++k) x[k] = ux(rng);
    return x;
  };

  A2Report rep;
  rep.samples = opts.n_samples;
  const double q = model.q;
  for (std::size_t i = 0; i < opts.n_samples; ++i) {
    const Point x = draw_x();
    const double t = std::min(ut(rng), std::nextafter(env.horizon(), 0.0));
    const Point v = draw_v(i);
    const double L = model.eval(env, x, t, v);
    const double vq = std::pow(norm(v, d), q);
    const double n_t = nu(t);
    const double lower = vq / model.N1 - n_t;
    const double upper = model.N1 * vq + n_t;
    const double excess = std::max(lower - L, L - upper);
    const double scale = 1.0 + std::abs(L);
    if (excess > opts.tolerance * scale) {
      ++rep.bound_violations;
      rep.bound_violation = std::max(rep.bound_violation, excess);
    }

    // Pair for the modulus inequality; every other pair reuses v.
    const Point y = draw_x();
    const double s = std::min(ut(rng), std::nextafter(env.horizon(), 0.0));
    const Point w = (i % 2 == 0) ? v : draw_v(i + 1);
    const double Lw = model.eval(env, y, s, w);
    Point dv{0.0, 0.0};
    for (int k = 0; k < d; ++k) dv[k] = v[k] - w[k];
    const double diff = std::abs(L - Lw) - nu(s) - n_t;
    if (diff > opts.tolerance * (1.0 + std::abs(L) + std::abs(Lw))) {
      const double dvn = norm(dv, d);
      if (dvn == 0.0) {
        ++rep.regularity_violations;
        rep.regularity_violation = std::max(rep.regularity_violation, diff);
      } else {
        const double weight =
            dvn * (std::pow(norm(v, d), q - 1.0) + std::pow(norm(w, d), q - 1.0) + 1.0);
        rep.regularity_constant = std::max(rep.regularity_constant, diff / weight);
      }
    }
  }
  rep.pass = rep.bound_violations == 0 && rep.regularity_violations == 0;
  return rep;
}

Point ConvexProfile::point(std::size_t i) const {
  Point p{0.0, 0.0};
  for (int k = 0; k < dim; ++k) p[k] = coords[i * dim + k];
  return p;
}

void ConvexProfile::validate() const {
  require(dim >= 1 && dim <= kMaxDim, "profile dimension must be 1 or 2");
  require(!values.empty(), "profile is empty");
  require(coords.size() == values.size() * static_cast<std::size_t>(dim),
          "profile coordinate count does not match values");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("profile holds a non-finite value");
  }
}

ConvexProfile ConvexProfile::sample_1d(double lo, double hi, double step,
                                       const std::function<double(double)>& f) {
  require(step > 0.0 && hi >= lo, "bad 1-D sampling range");
  ConvexProfile p;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  p.coords.reserve(n);
  p.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    p.coords.push_back(v);
    p.values.push_back(f(v));
  }
  return p;
}

LegendreResult legendre_argmax(const ConvexProfile& profile, const Point& p) {
  profile.validate();
  LegendreResult best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < profile.size(); ++i) {
    double dot = 0.0;
    for (int k = 0; k < profile.dim; ++k) dot += p[k] * profile.coords[i * profile.dim + k];
    const double val = dot - profile.values[i];
    if (val > best.value) best = {val, i};
  }
  return best;
}

double legendre(const ConvexProfile& profile, const Point& p) {
  return legendre_argmax(profile, p).value;
}

ConvexProfile legendre_profile(const ConvexProfile& profile, const std::vector<double>& momenta) {
  require(profile.dim == 1, "legendre_profile works on 1-D profiles");
  ConvexProfile out;
  out.coords = momenta;
  out.values.reserve(momenta.size());
  for (double p : momenta) out.values.push_back(legendre(profile, Point{p, 0.0}));
  return out;
}

void write_profile_csv(std::ostream& os, const ConvexProfile& profile,
                       const std::string& value_name) {
  profile.validate();
  static const char* names[] = {"coordinate", "coordinate_y"};
  for (int k = 0; k < profile.dim; ++k) os << (k ? "," : "") << names[k];
  os << ',' << value_name << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    for (int k = 0; k < profile.dim; ++k) os << (k ? "," : "") << profile.coords[i * profile.dim + k];
    os << ',' << profile.values[i] << '\n';
  }
}

ConvexProfile read_profile_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "profile CSV has no header");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  require(columns == 2 || columns == 3, "profile CSV must have 2 or 3 columns");
  ConvexProfile p;
  p.dim = static_cast<int>(columns) - 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    require(static_cast<long>(row.size()) == columns, "ragged profile CSV row");
    for (int k = 0; k < p.dim; ++k) p.coords.push_back(row[k]);
    p.values.push_back(row.back());
  }
  p.validate();
  return p;
}

void SlowVaryingParams::validate() const {
  require(c1 > 0.0 && std::isfinite(c1), "c1 must be positive");
  require(q > 1.0, "q must be > 1");
}

double SlowVaryingParams::exponent() const { return 1.0 / std::min(2.0, q); }

double phi(double s, const SlowVaryingParams& p) {
  require(s >= 1.0, "phi is defined for s >= 1");
  return std::exp(p.c1 * std::pow(std::log(s), p.exponent()));
}

double psi(double t, const SlowVaryingParams& p) {
  require(t > std::numbers::e, "psi is defined for t > e");
  const double lt = std::log(t);
  return std::exp(4.0 * p.c1 * std::log(lt) * std::pow(lt, p.exponent()));
}

double phi_rate(double t, const SlowVaryingParams& p) {
  require(t > std::numbers::e, "phi_rate is defined for t > e");
  const double lt = std::log(t);
  return std::exp(8.0 * p.c1 * std::log(lt) * std::pow(lt, p.exponent()));
}

double big_lambda(double x_norm, double t, double q) {
  require(t > 0.0, "Lambda needs t > 0");
  const double r = x_norm / t;
  return (std::pow(r, q) + 1.0) * std::log(r + 2.0);
}

double sup_tail_average(const Environment& env, double s, double t,
                        const LagrangianModel* model) {
  require(s >= 0.0 && s < t, "tail average needs 0 <= s < t");
  auto integral = [&](double a, double b) {
    return model ? model->nu_integral(env, a, b) : env.nu_integral(a, b);
  };
  // The average over [w,t] is monotone in w between slab boundaries.
  double best = integral(s, t) / (t - s);
  for (double w = 0.0; w < s; w += 1.0) best = std::max(best, integral(w, t) / (t - w));
  return best;
}

double a_xts(const Environment& env, double x_norm, double t, double s, double q,
             const LagrangianModel* model) {
  return std::pow(x_norm / t, q) + sup_tail_average(env, s, t, model);
}

double exponent_f(double a, double q) {
  return a / ((1.0 - a) * (q - 1.0) * q + q) + (q - 1.0) / q;
}

double exponent_g(double a, double q) { return a / ((1.0 - a) * (q - 1.0) + 1.0); }

std::vector<ExponentRow> exponent_sequences(double q, int n_max) {
  require(std::isfinite(q) && q > 1.0, "exponent sequences need q > 1");
  require(n_max >= 0, "n_max must be nonnegative");
  const double qp = q / (q - 1.0);
  std::vector<ExponentRow> rows;
  rows.reserve(n_max + 1);
  double a = 1.0 / qp;
  double l = q - 1.0;
  double l_closed = q - 1.0;
  for (int n = 0; n <= n_max; ++n) {
    if (n >= 1) l_closed *= 1.0 + qp / n;
    ExponentRow r;
    r.n = n;
    r.a = a;
    r.b = 1.0 / (n * (q - 1.0) + q);
    r.g_of_a = exponent_g(a, q);
    r.f_of_a = exponent_f(a, q);
    r.l = l;
    r.l_closed = l_closed;
    r.l_bound = n >= 1 ? (q - 1.0) * std::exp(qp) * std::pow(n, qp)
                       : std::numeric_limits<double>::infinity();
    rows.push_back(r);
    l /= r.g_of_a;
    a = r.f_of_a;
  }
  return rows;
}

}  // namespace hjlab
