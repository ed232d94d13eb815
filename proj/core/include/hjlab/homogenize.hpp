#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjlab/env_field.hpp"
#include "hjlab/lagrangian.hpp"
#include "hjlab/metric_dp.hpp"
#include "hjlab/stats.hpp"

namespace hjlab {

struct EnsembleSpec {
  EnvironmentSpec env;
  LagrangianModel model;
  GridSpec grid;
  // Grow half_width to the padding rule for each run instead of rejecting.
  bool auto_pad = true;
  int replicas = 2;
  std::vector<Point> velocities{Point{0.0, 0.0}};
  std::vector<double> ladder{32.0};  // sorted time rungs t_min 2^j
  int workers = 1;

  void validate() const;
  // Replica i draws from its own counter stream of the master seed.
  Environment replica(int i) const;
  // Grid satisfying X >= reach, or a ValidationError naming `what`.
  GridSpec padded_grid(double reach, const std::string& what) const;
  double t_max() const { return ladder.back(); }
};

// m(t v, t) / t per velocity, rung and replica.
struct LadderSamples {
  int dim = 1;
  std::vector<Point> velocities;
  std::vector<double> ladder;
  std::vector<std::vector<std::vector<double>>> values;  // [v][rung][replica]

  double mean(std::size_t v, std::size_t r) const;
  double se(std::size_t v, std::size_t r) const;
};

LadderSamples sample_ladder(const EnsembleSpec& spec);

struct EffectiveProfile {
  ConvexProfile profile;  // mean of m(t_max v, t_max) / t_max
  std::vector<double> se;
  int replicas = 0;
  double t_max = 0.0;
  std::vector<double> ladder;
  std::vector<std::vector<double>> rung_means;  // [v][rung]
  std::vector<std::vector<double>> rung_se;
  // Per velocity: top-three-rung extrapolation when it is stable, else the
  // top rung mean.
  ConvexProfile extrapolated;
};

EffectiveProfile estimate_Lbar(const EnsembleSpec& spec);
EffectiveProfile profile_from_samples(const LadderSamples& s);
void write_effective_csv(std::ostream& os, const EffectiveProfile& p);

struct HbarEstimate {
  double value = 0.0;
  Point argmax{0.0, 0.0};
  double cap = 0.0;  // 2 (N1 |p|)^{1/(q-1)}
  // 1/N1 |v|^q + 1 <= Lbar(v) on every profile sample.
  bool coercive = false;
  double coercivity_margin = 0.0;  // min over samples of Lbar - lower bound
};

HbarEstimate estimate_Hbar(const ConvexProfile& lbar, const Point& p, const LagrangianModel& model);

// Aitken extrapolation from the last three values of a doubling ladder.
struct Extrapolation {
  double value = 0.0;
  double order = 0.0;  // fitted exponent alpha of f = a + b t^-alpha
  bool fallback = false;
};
Extrapolation richardson_limit(const std::vector<double>& f, const std::vector<double>& t);

enum class TailCase { bounded, exponential };

struct ConcentrationReport {
  Point x0{0.0, 0.0};
  double t0 = 0.0;
  std::vector<double> values;
  double mean = 0.0;
  double variance = 0.0;
  double scale = 0.0;  // sqrt(t0) phi(t0) (|x0|^q / t0^q + C0 log t0)
  double C0 = 0.0;
  std::vector<double> z;
  std::vector<double> lambda;
  std::vector<double> tail;  // P(|Z| > lambda)
  TailCase tail_case = TailCase::bounded;
  // Slope of log tail against lambda^2 (bounded) or lambda^{2/3}.
  std::optional<LineFit> fit;
  bool deterministic = false;
};

struct FluctuationOptions {
  SlowVaryingParams slow;
  int lambda_points = 20;
  double lambda_max = 0.0;  // 0: max |Z|
};

ConcentrationReport fluctuation_stats(const EnsembleSpec& spec, const Point& x0, double t0,
                                      const FluctuationOptions& opts = {});

struct RateFit {
  std::vector<double> abscissae;
  std::vector<double> ordinates;
  double slope = 0.0;
  double intercept = 0.0;
  double residual_norm = 0.0;
  // Same fit after dividing the ordinates by a slow-varying factor.
  double deflated_slope = 0.0;
  std::string deflation;
  bool degenerate = false;
  double proxy = 0.0;
  double proxy_se = 0.0;
  std::vector<std::string> warnings;
  // Extra per-rung diagnostics (means, standard errors, variances).
  std::vector<double> rung_mean;
  std::vector<double> rung_se;
  std::vector<double> rung_variance;
  bool ordering_ok = true;
};

inline constexpr double kRateFloor = 1e-9;

// Log-log least squares over positive ordinates; degenerate if fewer than
// three remain above kRateFloor.
RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::function<double(double)>& deflate = {},
                 const std::string& deflation_name = "");

RateFit deterministic_gap(const EnsembleSpec& spec, const Point& v,
                          const SlowVaryingParams& slow = {});

RateFit large_time_average_error(const EnsembleSpec& spec, double R,
                                 std::optional<double> hbar0 = std::nullopt,
                                 const SlowVaryingParams& slow = {});

RateFit homog_error_curve(const EnsembleSpec& spec, const ConvexProfile& lbar,
                          const std::function<double(const Point&)>& g,
                          const std::vector<double>& eps_ladder, double t_fixed, double R,
                          const SlowVaryingParams& slow = {});

}  // namespace hjlab
