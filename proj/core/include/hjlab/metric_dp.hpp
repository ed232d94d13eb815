#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "hjlab/env_field.hpp"
#include "hjlab/lagrangian.hpp"

namespace hjlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Index = std::array<int, kMaxDim>;

// Uniform space-time grid on [-X, X]^d with time step dt (1/dt integer).
struct GridSpec {
  int d = 1;
  double dx = 1.0 / 8;
  double dt = 1.0 / 4;
  double half_width = 16.0;
  double v_cap = 4.0;

  void validate() const;

  int nodes_per_axis() const;
  std::size_t node_count() const;
  int steps_per_unit() const;
  // Largest integer offset per axis allowed by the velocity cap.
  int window() const;
  double coordinate(int i) const { return -half_width + i * dx; }
  // Nearest node; throws if x is not within 1e-6 dx of a node.
  Index snap(const Point& x) const;
  bool on_grid(const Point& x) const;
  Point position(const Index& idx) const;
  int steps_for(double duration) const;
  // Checks that the cone of radius v_cap * duration around x stays inside.
  void require_padding(const Point& x, double duration) const;
};

// Velocity cap 2 * (4 N1 sup nu)^{1/q} over the horizon [t0, t1].
double default_v_cap(const LagrangianModel& model, const Environment& env, double t0, double t1);

// Declared discretisation slack of the scheme: C (dx + dt), C = 1.
double quadrature_tolerance(const GridSpec& grid);

// Values of one time layer on an axis-aligned box of active nodes. Nodes
// outside the box are unreachable (+inf).
struct Layer {
  Index lo{0, 0};
  Index hi{-1, -1};  // inclusive
  std::vector<double> values;
  std::vector<std::uint16_t> back;  // offset index of the argmin predecessor

  bool contains(const Index& idx, int d) const;
  std::size_t local(const Index& idx, int d) const;
  double at(const Index& idx, int d) const;
};

// Linear (1-D) or bilinear (2-D) interpolation inside one layer; +inf if a
// needed corner is inactive or off the grid.
double interpolate_layer(const GridSpec& grid, const Layer& layer, const Point& x);

enum class FieldKind { metric, solution };

// Layers k = 0..steps of a metric front m(origin; x, t_k) or of a solution u.
class SpaceTimeField {
 public:
  FieldKind kind = FieldKind::metric;
  GridSpec grid;
  double t0 = 0.0;
  int steps = 0;
  Point origin{0.0, 0.0};
  double tau_quad = 0.0;
  double lipschitz_bound = 0.0;  // of the initial data (solutions)
  // Only layers recorded with keep_layers; index k holds time t0 + k dt.
  std::vector<Layer> layers;
  // Offset table used for backpointers.
  std::vector<Index> offsets;

  double time(int k) const { return t0 + k * grid.dt; }
  int layer_of(double t) const;
  bool has_backpointers() const;
  double value(int k, const Index& idx) const;
  double value_at(int k, const Point& x) const;  // node lookup
  // Linear (1-D) or bilinear (2-D) interpolation; +inf if a corner is.
  double interpolate(int k, const Point& x) const;
  const Layer& layer(int k) const;
};

using MetricField = SpaceTimeField;
using SolutionField = SpaceTimeField;

struct OptimalPath {
  std::vector<double> times;
  std::vector<Point> positions;
  double value = 0.0;  // field value at the endpoint
};

struct SolveOptions {
  bool keep_layers = true;
  bool keep_backpointers = true;
  int workers = 1;
  // Restrict work to nodes that can still reach the ball of this radius
  // around target_center at the final time.
  std::optional<Point> target_center;
  double target_radius = 0.0;
  // Called with every computed layer (k, layer), also when not kept.
  std::function<void(int, const Layer&)> observer;
};

// m(origin; x, t) for t in [t_origin, t_origin + duration].
MetricField solve_metric_front(const Environment& env, const LagrangianModel& model,
                               const GridSpec& grid, const Point& origin, double t_origin,
                               double duration, const SolveOptions& opts = {});

// m(x1,t1; x2,t2). Returns 0 when the points coincide.
double point_metric(const Environment& env, const LagrangianModel& model, const GridSpec& grid,
                    const Point& x1, double t1, const Point& x2, double t2, int workers = 1);

OptimalPath backtrace_path(const MetricField& field, int k, const Point& endpoint);

// Midpoint-rule action of a grid path; equals the field value it came from.
double path_action(const Environment& env, const LagrangianModel& model, const OptimalPath& path);

// Initial data on the grid (node order row-major, +inf allowed as a barrier).
std::vector<double> sample_initial_data(const GridSpec& grid,
                                        const std::function<double(const Point&)>& g);

// u(x,t) = inf_y g(y) + m(y,t0; x,t) by the same Bellman recursion.
SolutionField hopf_lax_solve(const Environment& env, const LagrangianModel& model,
                             const GridSpec& grid, const std::vector<double>& initial,
                             double t0, double duration, const SolveOptions& opts = {});

// u^eps(x,t) = eps u(x/eps, t/eps), returned as a field on the macroscopic
// grid (dx, dt, X all multiplied by eps). `micro` is the microscopic grid.
SolutionField scaled_solution(const Environment& env, const LagrangianModel& model, double eps,
                              const GridSpec& micro, const std::function<double(const Point&)>& g,
                              double t_macro, const SolveOptions& opts = {});

// ubar(x,t) = inf_v g(x - t v) + t Lbar(v) over the profile grid.
double effective_hopf_lax(const ConvexProfile& lbar, const std::function<double(const Point&)>& g,
                          const Point& x, double t);

}  // namespace hjlab
