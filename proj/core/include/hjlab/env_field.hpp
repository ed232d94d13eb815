#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hjlab {

inline constexpr int kMaxDim = 2;

// Spatial point; coordinates beyond the active dimension are ignored.
using Point = std::array<double, kMaxDim>;

double norm(const Point& p, int d);

enum class AmplitudeLaw {
  bounded,           // per-slab scale S ~ U[0, V_max]
  exponential_tail,  // per-slab scale S ~ Exp(rate), clipped far in the tail
  periodic,          // deterministic V(x) = A * mean_i cos(2 pi x_i / period)
};

std::string to_string(AmplitudeLaw law);
AmplitudeLaw amplitude_law_from_string(const std::string& name);

struct EnvironmentSpec {
  int d = 1;
  int slab_count = 1;
  double cell_size = 1.0;
  AmplitudeLaw law = AmplitudeLaw::bounded;
  // bounded: V_max; exponential_tail: rate; periodic: amplitude.
  double law_param = 1.0;
  // periodic only.
  double period = 1.0;
  double a_min = 1.0;
  double a_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FieldSample {
  double a;
  double V;
};

// Seeded space-time random field with unit-length independent time slabs.
//
// Within slab j the field is
//   V(x,t) = S_j * xi_{j,c(x)} * b(t - j) * prod_i b(local_i(x)),
//   a(x,t) = a_min + (a_max - a_min) * eta_{j,c(x)} * prod_i b(local_i(x)),
// where c(x) is the index of the cell containing x + shift_j, shift_j is
// uniform in one cell, xi ~ U[-1,1], eta ~ U[0,1], and b is the C^1
// piecewise-cubic bump on [0,1] (zero value and slope at the ends, 1 at 1/2).
// The envelope is nu_t = 1 + c_nu * S_j with c_nu = 1, which dominates
// |V| on the slab and makes nu_t >= 1.
//
// The periodic law is time independent: V = A * mean_i cos(2 pi x_i / P),
// S_j = A for every slab.
class Environment {
 public:
  static constexpr double kNuCoupling = 1.0;  // c_nu
  static constexpr double kTailClipQuantile = 1e-12;

  explicit Environment(EnvironmentSpec spec, std::uint64_t stream = 0);

  const EnvironmentSpec& spec() const { return spec_; }
  std::uint64_t stream() const { return stream_; }
  int dim() const { return spec_.d; }
  double horizon() const { return static_cast<double>(spec_.slab_count); }

  // Same law, independent counter stream (used for replicas).
  Environment replica(std::uint64_t index) const;

  FieldSample sample(const Point& x, double t) const;
  double nu_at(double t) const;
  double nu_integral(double s, double t) const;
  // Largest nu_r over slabs intersecting [s, t).
  double nu_max(double s, double t) const;
  // Slab-level amplitude S_j (also its sup over space).
  double slab_scale(int slab) const;
  // Upper bound on sup|V| over the whole environment.
  double amplitude_bound() const;
  // Upper bound on any nu_t.
  double nu_bound() const { return 1.0 + kNuCoupling * amplitude_bound(); }

  static double bump(double u);

 private:
  int slab_of(double t) const;
  void check_time(double t) const;

  EnvironmentSpec spec_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::vector<double> scale_;  // S_j
  std::vector<Point> shift_;   // per-slab cell shift
  std::vector<double> nu_prefix_;
};

Environment make_environment(const EnvironmentSpec& spec);

}  // namespace hjlab
