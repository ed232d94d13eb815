#include "hjlab/env_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hjlab/counter_rng.hpp"
#include "hjlab/errors.hpp"

namespace hjlab {

namespace {

enum Salt : std::uint64_t {
  kSaltScale = 1,
  kSaltShift = 2,
  kSaltXi = 3,
  kSaltEta = 4,
  kSaltStream = 5,
};

}  // namespace

double norm(const Point& p, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

std::string to_string(AmplitudeLaw law) {
  switch (law) {
    case AmplitudeLaw::bounded: return "bounded";
    case AmplitudeLaw::exponential_tail: return "exponential_tail";
    case AmplitudeLaw::periodic: return "periodic";
  }
  return "?";
}

AmplitudeLaw amplitude_law_from_string(const std::string& name) {
  if (name == "bounded") return AmplitudeLaw::bounded;
  if (name == "exponential_tail") return AmplitudeLaw::exponential_tail;
  if (name == "periodic") return AmplitudeLaw::periodic;
  throw ValidationError("unknown amplitude law '" + name + "'");
}

void EnvironmentSpec::validate() const {
  require(d >= 1 && d <= kMaxDim, "environment dimension must be 1 or 2");
  require(slab_count >= 1, "slab_count must be positive");
  require(std::isfinite(cell_size) && cell_size > 0.0, "cell_size must be positive");
  require(a_min > 0.0, "a_min must be positive");
  require(a_max >= a_min && std::isfinite(a_max), "a_max must be finite and >= a_min");
  switch (law) {
    case AmplitudeLaw::bounded:
      require(law_param >= 0.0 && std::isfinite(law_param), "bounded law needs V_max >= 0");
      break;
    case AmplitudeLaw::exponential_tail:
      require(law_param > 0.0 && std::isfinite(law_param), "exponential law needs rate > 0");
      break;
    case AmplitudeLaw::periodic:
      require(law_param >= 0.0 && std::isfinite(law_param), "periodic law needs amplitude >= 0");
      require(period > 0.0 && std::isfinite(period), "periodic law needs period > 0");
      break;
  }
}

double Environment::bump(double u) {
  // smoothstep(2u) on [0,1/2], mirrored on [1/2,1].
  const double s = u < 0.5 ? 2.0 * u : 2.0 - 2.0 * u;
  return s * s * (3.0 - 2.0 * s);
}

Environment::Environment(EnvironmentSpec spec, std::uint64_t stream)
    : spec_(std::move(spec)), stream_(stream) {
  spec_.validate();
  key_ = stream_ == 0 ? spec_.seed : hash_key({spec_.seed, kSaltStream, stream_});

  const int n = spec_.slab_count;
  scale_.resize(n);
  shift_.resize(n);
  nu_prefix_.assign(n + 1, 0.0);
  const double clip = -std::log(kTailClipQuantile) / spec_.law_param;
  for (int j = 0; j < n; ++j) {
    const auto sj = as_word(j);
    const double u = to_unit_open0(hash_key({key_, kSaltScale, sj}));
    switch (spec_.law) {
      case AmplitudeLaw::bounded: scale_[j] = spec_.law_param * u; break;
      case AmplitudeLaw::exponential_tail:
        scale_[j] = std::min(-std::log(u) / spec_.law_param, clip);
        break;
      case AmplitudeLaw::periodic: scale_[j] = spec_.law_param; break;
    }
    for (int i = 0; i < kMaxDim; ++i) {
      shift_[j][i] =
          spec_.cell_size * to_unit(hash_key({key_, kSaltShift, sj, as_word(i)}));
    }
    nu_prefix_[j + 1] = nu_prefix_[j] + 1.0 + kNuCoupling * scale_[j];
  }
}

Environment Environment::replica(std::uint64_t index) const {
  return Environment(spec_, hash_key({stream_, index, 0x5eedull}) | 1ull);
}

int Environment::slab_of(double t) const {
  int j = static_cast<int>(std::floor(t));
  return std::clamp(j, 0, spec_.slab_count - 1);
}

void Environment::check_time(double t) const {
  if (!(t >= 0.0 && t < horizon())) {
    throw ValidationError("time " + std::to_string(t) + " outside environment horizon [0," +
                          std::to_string(spec_.slab_count) + ")");
  }
}

double Environment::slab_scale(int slab) const {
  require(slab >= 0 && slab < spec_.slab_count, "slab index out of range");
  return scale_[slab];
}

double Environment::amplitude_bound() const {
  switch (spec_.law) {
    case AmplitudeLaw::bounded:
    case AmplitudeLaw::periodic: return spec_.law_param;
    case AmplitudeLaw::exponential_tail:
      return -std::log(kTailClipQuantile) / spec_.law_param;
  }
  return 0.0;
}

FieldSample Environment::sample(const Point& x, double t) const {
  check_time(t);
  const int j = slab_of(t);
  if (spec_.law == AmplitudeLaw::periodic) {
    double v = 0.0;
    for (int i = 0; i < spec_.d; ++i) {
      v += std::cos(2.0 * std::numbers::pi * x[i] / spec_.period);
    }
    // Coefficient a uses the same cell machinery as the random laws so that
    // a range other than [a,a] is still honoured.
    FieldSample out{spec_.a_min, spec_.law_param * v / spec_.d};
    if (spec_.a_max > spec_.a_min) {
      double prof = 1.0;
      std::uint64_t cell_words[kMaxDim] = {0, 0};
      for (int i = 0; i < spec_.d; ++i) {
        const double z = x[i] / spec_.cell_size;
        const double c = std::floor(z);
        prof *= bump(z - c);
        cell_words[i] = as_word(static_cast<std::int64_t>(c));
      }
      const double eta = to_unit(hash_key({key_, kSaltEta, cell_words[0], cell_words[1]}));
      out.a = spec_.a_min + (spec_.a_max - spec_.a_min) * eta * prof;
    }
    return out;
  }

  const auto sj = as_word(j);
  double prof = 1.0;
  std::uint64_t cell_words[kMaxDim] = {0, 0};
  for (int i = 0; i < spec_.d; ++i) {
    const double z = (x[i] + shift_[j][i]) / spec_.cell_size;
    const double c = std::floor(z);
    prof *= bump(z - c);
    cell_words[i] = as_word(static_cast<std::int64_t>(c));
  }
  FieldSample out{spec_.a_min, 0.0};
  if (scale_[j] > 0.0 && prof > 0.0) {
    const double xi =
        2.0 * to_unit(hash_key({key_, kSaltXi, sj, cell_words[0], cell_words[1]})) - 1.0;
    out.V = scale_[j] * xi * bump(t - j) * prof;
  }
  if (spec_.a_max > spec_.a_min && prof > 0.0) {
    const double eta = to_unit(hash_key({key_, kSaltEta, sj, cell_words[0], cell_words[1]}));
    out.a = spec_.a_min + (spec_.a_max - spec_.a_min) * eta * prof;
  }
  return out;
}

double Environment::nu_at(double t) const {
  check_time(t);
  return 1.0 + kNuCoupling * scale_[slab_of(t)];
}

double Environment::nu_integral(double s, double t) const {
  require(s <= t, "nu_integral needs s <= t");
  require(s >= 0.0 && t <= horizon(), "nu_integral interval outside horizon");
  auto primitive = [this](double r) {
    const int j = std::min(static_cast<int>(std::floor(r)), spec_.slab_count);
    const double frac = r - j;
    double acc = nu_prefix_[j];
    if (j < spec_.slab_count && frac > 0.0) acc += frac * (1.0 + kNuCoupling * scale_[j]);
    return acc;
  };
  return primitive(t) - primitive(s);
}

double Environment::nu_max(double s, double t) const {
  require(s <= t, "nu_max needs s <= t");
  const int j0 = slab_of(std::max(s, 0.0));
  int j1 = slab_of(std::max(t, 0.0));
  if (t > s && t == std::floor(t)) j1 = std::max(j0, j1 - 1);
  double best = 1.0;
  for (int j = j0; j <= j1; ++j) best = std::max(best, 1.0 + kNuCoupling * scale_[j]);
  return best;
}

Environment make_environment(const EnvironmentSpec& spec) { return Environment(spec); }

}  // namespace hjlab
