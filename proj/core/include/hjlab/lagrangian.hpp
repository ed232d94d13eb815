#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjlab/env_field.hpp"

namespace hjlab {

// L(x,t,v) = a(x,t) |v|^q / q + V(x,t) + c_shift.
struct LagrangianModel {
  double q = 2.0;
  double N1 = 2.0;
  double c_shift = 0.0;

  void validate() const;

  double eval(const Environment& env, const Point& x, double t, const Point& v) const;

  // Envelope of the model: the environment's nu_t plus |c_shift|.
  double nu_at(const Environment& env, double t) const;
  double nu_integral(const Environment& env, double s, double t) const;

  double conjugate_exponent() const { return q / (q - 1.0); }
};

// Smallest N1 for which the coercivity sandwich holds with a in [a_min, a_max].
double admissible_N1(const EnvironmentSpec& spec, double q);

// Shift that makes an estimated effective Lagrangian satisfy Lbar(0) >= 1.
double normalizing_shift(double lbar_at_zero);

struct A2Report {
  std::size_t samples = 0;
  // Largest violation of the growth sandwich; 0 when it holds everywhere.
  double bound_violation = 0.0;
  std::size_t bound_violations = 0;
  // Smallest C for which the modulus inequality holds on the sampled pairs.
  double regularity_constant = 0.0;
  // Pairs with v == w that still exceed nu_s + nu_t (no finite C helps).
  std::size_t regularity_violations = 0;
  double regularity_violation = 0.0;
  bool pass = false;
};

struct A2Options {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 12345;
  double x_extent = 64.0;   // sample x in [-x_extent, x_extent]^d
  double v_extent = 8.0;    // sample v in the ball of this radius
  double tolerance = 1e-9;
  // Replaces the model envelope; used to exercise failure reporting.
  std::function<double(double)> nu_override;
};

A2Report verify_a2(const LagrangianModel& model, const Environment& env, const A2Options& opts);

// Sampled function on a velocity (or momentum) grid. Coordinates are stored
// flat, dim entries per sample; 1-D profiles are sorted.
struct ConvexProfile {
  int dim = 1;
  std::vector<double> coords;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  Point point(std::size_t i) const;
  void validate() const;

  static ConvexProfile sample_1d(double lo, double hi, double step,
                                 const std::function<double(double)>& f);
};

struct LegendreResult {
  double value;
  std::size_t argmax;
};

// sup over the sampled grid of p.v - L(v).
LegendreResult legendre_argmax(const ConvexProfile& profile, const Point& p);
double legendre(const ConvexProfile& profile, const Point& p);
// Conjugates a whole profile onto a given momentum grid (1-D).
ConvexProfile legendre_profile(const ConvexProfile& profile, const std::vector<double>& momenta);

void write_profile_csv(std::ostream& os, const ConvexProfile& profile,
                       const std::string& value_name = "value");
ConvexProfile read_profile_csv(std::istream& is);

// Slow-varying correction factors.
struct SlowVaryingParams {
  double c1 = 1.0;
  double q = 2.0;
  void validate() const;
  double exponent() const;  // 1 / min(2, q)
};

// exp(c1 (log s)^{1/(2 min q)}), s >= 1.
double phi(double s, const SlowVaryingParams& p);
// exp(4 c1 log log t (log t)^{1/(2 min q)}), t > e.
double psi(double t, const SlowVaryingParams& p);
// exp(8 c1 log log t (log t)^{1/(2 min q)}), t > e.
double phi_rate(double t, const SlowVaryingParams& p);
// (|x|^q/t^q + 1) log(|x|/t + 2), t > 0.
double big_lambda(double x_norm, double t, double q);
// sup over w in [0,s] of the nu average on [w,t]; 0 <= s < t.
double sup_tail_average(const Environment& env, double s, double t,
                        const LagrangianModel* model = nullptr);
// |x|^q/t^q + sup_tail_average(s, t).
double a_xts(const Environment& env, double x_norm, double t, double s, double q,
             const LagrangianModel* model = nullptr);

struct ExponentRow {
  int n;
  double a;          // a_n by iterating f from a_0 = 1/q'
  double b;          // closed form 1/(n(q-1)+q)
  double g_of_a;     // g(a_n)
  double f_of_a;     // f(a_n) = a_{n+1}
  double l;          // l_0 = q-1, l_n = l_0 / prod_{k<n} g(a_k)
  double l_closed;   // (q-1) prod_{i<=n} (1 + q'/i)
  double l_bound;    // (q-1) e^{q'} n^{q'}  (n >= 1)
};

double exponent_f(double a, double q);
double exponent_g(double a, double q);
std::vector<ExponentRow> exponent_sequences(double q, int n_max);

}  // namespace hjlab
