#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hjlab/env_field.hpp"
#include "hjlab/lagrangian.hpp"
#include "hjlab/metric_dp.hpp"

namespace hjlab::testing {

inline EnvironmentSpec free_spec(int slabs = 64) {
  EnvironmentSpec s;
  s.law = AmplitudeLaw::bounded;
  s.law_param = 0.0;
  s.slab_count = slabs;
  return s;
}

inline EnvironmentSpec bounded_spec(std::uint64_t seed, int slabs = 64, double vmax = 1.0) {
  EnvironmentSpec s;
  s.law = AmplitudeLaw::bounded;
  s.law_param = vmax;
  s.slab_count = slabs;
  s.seed = seed;
  return s;
}

inline GridSpec grid1(double dx, double dt, double X, double v_cap) {
  GridSpec g;
  g.d = 1;
  g.dx = dx;
  g.dt = dt;
  g.half_width = X;
  g.v_cap = v_cap;
  return g;
}

struct SandwichCount {
  std::size_t nodes = 0;
  std::size_t upper = 0;
  std::size_t lower = 0;
  double worst_upper = 0.0;
  double worst_lower = 0.0;
};

// Straight-line upper bound and the 3 int nu lower bound at every finite node.
inline SandwichCount sandwich_scan(const SpaceTimeField& f, const Environment& env,
                                   const LagrangianModel& m) {
  SandwichCount c;
  const int d = f.grid.d;
  const double tau = f.tau_quad;
  for (int k = 1; k <= f.steps; ++k) {
    const Layer& l = f.layers[k];
    if (l.values.empty()) continue;
    const double t = f.time(k), s = f.t0, dur = t - s;
    const double nu = m.nu_integral(env, s, t);
    for (int i = l.lo[0]; i <= l.hi[0]; ++i) {
      for (int j = l.lo[1]; j <= (d == 1 ? l.lo[1] : l.hi[1]); ++j) {
        const Index idx{i, j};
        const double v = l.at(idx, d);
        if (v == kInf) continue;
        ++c.nodes;
        const Point x = f.grid.position(idx);
        const Point dxp{x[0] - f.origin[0], x[1] - f.origin[1]};
        const double r = std::pow(norm(dxp, d), m.q) / std::pow(dur, m.q - 1.0);
        const double up = m.N1 * r + nu;
        const double lo = r / m.N1 - 3.0 * nu;
        if (v > up + tau) {
          ++c.upper;
          c.worst_upper = std::max(c.worst_upper, v - up);
        }
        if (v < lo - tau) {
          ++c.lower;
          c.worst_lower = std::max(c.worst_lower, lo - v);
        }
      }
    }
  }
  return c;
}

struct SubadditivityCount {
  std::size_t triples = 0;
  std::size_t violations = 0;
  double worst = 0.0;
};

// m(0,0; x3,t3) <= m(0,0; x2,t2) + m(x2,t2; x3,t3) + tau on random triples:
// `splits` random split nodes, `per_split` random end nodes after each.
inline SubadditivityCount subadditivity_scan(const SpaceTimeField& f, const Environment& env,
                                             const LagrangianModel& m, int splits, int per_split,
                                             std::uint64_t seed) {
  SubadditivityCount c;
  std::mt19937_64 rng(seed);
  const int d = f.grid.d;
  for (int sidx = 0; sidx < splits; ++sidx) {
    // split time in [1, T-1], node inside the reachable box
    std::uniform_int_distribution<int> uk(f.grid.steps_per_unit(), f.steps - f.grid.steps_per_unit());
    const int k2 = uk(rng);
    const Layer& l2 = f.layers[k2];
    Index i2{0, 0};
    for (int a = 0; a < d; ++a) {
      std::uniform_int_distribution<int> ui(l2.lo[a], l2.hi[a]);
      i2[a] = ui(rng);
    }
    const Point x2 = f.grid.position(i2);
    const double m12 = l2.at(i2, d);
    if (m12 == kInf) continue;
    const double t2 = f.time(k2);
    const double rest = f.time(f.steps) - t2;
    GridSpec g = f.grid;
    SolveOptions o;
    o.keep_backpointers = false;
    const SpaceTimeField seg = solve_metric_front(env, m, g, x2, t2, rest, o);
    std::uniform_int_distribution<int> uk3(1, seg.steps);
    for (int e = 0; e < per_split; ++e) {
      const int kk = uk3(rng);
      const int k3 = k2 + kk;
      const Layer& ls = seg.layers[kk];
      const Layer& l3 = f.layers[k3];
      Index i3{0, 0};
      for (int a = 0; a < d; ++a) {
        std::uniform_int_distribution<int> ui(ls.lo[a], ls.hi[a]);
        i3[a] = ui(rng);
      }
      const double m23 = ls.at(i3, d);
      const double m13 = l3.at(i3, d);
      if (m23 == kInf) continue;
      ++c.triples;
      const double excess = m13 - (m12 + m23);
      if (excess > f.tau_quad) {
        ++c.violations;
        c.worst = std::max(c.worst, excess);
      }
    }
  }
  return c;
}

}  // namespace hjlab::testing
