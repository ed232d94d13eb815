#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hjlab/env_field.hpp"
#include "hjlab/homogenize.hpp"
#include "hjlab/lagrangian.hpp"
#include "hjlab/metric_dp.hpp"

namespace hjlab {

struct HolderOptions {
  SlowVaryingParams slow;
  std::vector<double> epsilons{0.1, 0.25};
  double stride = 1.0;  // pair times are multiples of this (relative to the path start)
};

struct HolderReport {
  std::size_t pairs = 0;
  // max |g(s) - g(t')| / ((t'-s) exp(c1 log(t'/(t'-s))^{1/(2 min q)} / q) A^{1/q})
  double path_quotient = 0.0;
  // Smallest c1 keeping path_quotient <= 1; +inf if none does (a pair with
  // s = 0 already exceeds the envelope).
  double c1_needed = 0.0;
  std::vector<double> epsilons;
  // max |g(s) - g(t')| / (t'^eps (t'-s)^{1-eps} A^{1/q}), one per epsilon
  std::vector<double> holder_quotient;
};

// Pairs (s, t') on the stride grid with 0 <= s < t'; t' is the end of the
// optimal sub-path, so x = g(t') and A = A_{g(t'), t', s}.
HolderReport holder_quotients(const OptimalPath& path, const Environment& env,
                              const LagrangianModel& model, const HolderOptions& opts = {});

struct ConeSpec {
  int d = 1;
  Point x{0.0, 0.0};
  double t = 1.0;
  double n = 1.0;
  double c1 = 1.0;
  double q = 2.0;

  void validate() const;
  // n (log t)^2 phi(t)^{1/q} (|x|/t + 1)
  double opening() const;
};

bool cone_member(const ConeSpec& spec, const Point& y, double s);

struct QOracleOptions {
  int replicas = 32;
  double slack_se = 2.0;
  // Normalize so that the estimated Lbar(0) >= 1 by adding c s to E m.
  bool normalize = true;
  // Stream offset keeping calibration replicas apart from path replicas.
  int replica_offset = 1 << 20;
};

class QSetOracle {
 public:
  ConeSpec cone;            // n = 1
  double mbar = 0.0;        // proxy for mbar(x,t)
  double mbar_se = 0.0;
  Point ell_y{0.0, 0.0};    // l(y,s) = ell_y . y + ell_s s
  double ell_s = 0.0;
  double gap = 0.0;         // t^{1/2} phi(t)^3 Lambda_{x,t}
  double shift = 0.0;       // normalization added per unit time
  double slack_se = 2.0;
  SpaceTimeField mean_field;  // E m(y,s) estimate (shift included)
  SpaceTimeField se_field;
  bool calibrated = false;

  double ell(const Point& y, double s) const;
  // E m and its standard error at (y,s); +inf outside the sampled cone.
  std::pair<double, double> expected(const Point& y, double s) const;
  double inefficiency(const Point& y, double s) const { return expected(y, s).first - ell(y, s); }
};

QSetOracle calibrate_q_oracle(const EnsembleSpec& spec, const Point& x, double t,
                              const SlowVaryingParams& slow = {}, const QOracleOptions& opts = {});

bool q_member(const QSetOracle& oracle, const Point& y, double s);

enum class IncrementFlag { none, E, L, S };
std::string to_string(IncrementFlag f);

struct Skeleton {
  std::vector<Point> vertices;
  std::vector<double> times;
  double n = 1.0;
  bool good = true;
  std::string demotion;  // why the skeleton is only "plain"
  std::vector<bool> in_q;                     // per increment
  std::vector<std::optional<Point>> witness;  // per increment j = 1..k-1
  std::vector<IncrementFlag> flags;           // filled by skeleton_census

  int k() const { return static_cast<int>(vertices.size()) - 1; }
};

Skeleton extract_good_skeleton(const OptimalPath& path, const QSetOracle& oracle, const Point& x,
                               double t, double n);

struct SkeletonCensus {
  std::vector<IncrementFlag> flags;
  std::vector<double> inefficiency;
  int count_E = 0;
  int count_L = 0;
  int count_S = 0;
  int count_none = 0;
  int k = 0;
  bool k_within_10n = false;
  bool e_within_2n = false;
};

SkeletonCensus skeleton_census(Skeleton& skel, const Point& x, double t, double n,
                               const QSetOracle& oracle);

struct URegularityOptions {
  SlowVaryingParams slow;
  int layer_stride = 1;
};

struct URegularityReport {
  double space_quotient = 0.0;
  double time_quotient = 0.0;
  std::size_t space_pairs = 0;
  std::size_t time_checks = 0;
  std::size_t time_violations = 0;
  double worst_time_violation = 0.0;
  double tau_quad = 0.0;
};

URegularityReport u_regularity_check(const SpaceTimeField& field, const Environment& env,
                                     const LagrangianModel& model,
                                     const URegularityOptions& opts = {});

}  // namespace hjlab
