#include "hjlab/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "hjlab/errors.hpp"
#include "hjlab/field_io.hpp"
#include "hjlab/geometry_diag.hpp"
#include "hjlab/homogenize.hpp"
#include "hjlab/metric_dp.hpp"
#include "hjlab/parallel.hpp"
#include "hjlab/stats.hpp"

namespace hjlab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- config

// Keys whose value is replaced as a whole rather than merged key by key.
const std::set<std::string> kOpenKeys = {"law_params", "velocities", "probes", "origin", "start",
                                         "end",        "x0",         "x",      "v",      "slope",
                                         "hbar0",      "profile_csv", "momenta"};

void merge_into(json& base, const json& over, const std::string& prefix) {
  require(over.is_object(), "config " + (prefix.empty() ? std::string("root") : prefix) +
                                " must be a JSON object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError("unknown config key '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it->is_object() && !kOpenKeys.count(it.key())) {
      merge_into(slot, *it, path);
    } else {
      slot = *it;
    }
  }
}

void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json over = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) over = json{{*it, over}};
  merge_into(cfg, over, "");
}

double get_num(const json& j, const std::string& key) {
  require(j.contains(key) && j[key].is_number(), "config key '" + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& key) {
  require(j.contains(key) && j[key].is_number_integer(),
          "config key '" + key + "' must be an integer");
  return j[key].get<int>();
}

std::vector<double> get_nums(const json& j, const std::string& key) {
  require(j.contains(key) && j[key].is_array(), "config key '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    require(v.is_number(), "config key '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Point parse_point(const json& j, int d, const std::string& what) {
  Point p{0.0, 0.0};
  if (j.is_number()) {
    require(d == 1, what + " needs " + std::to_string(d) + " coordinates");
    p[0] = j.get<double>();
    return p;
  }
  require(j.is_array() && static_cast<int>(j.size()) == d,
          what + " needs " + std::to_string(d) + " coordinates");
  for (int i = 0; i < d; ++i) {
    require(j[i].is_number(), what + " coordinates must be numbers");
    p[i] = j[i].get<double>();
  }
  return p;
}

json point_json(const Point& p, int d) {
  json a = json::array();
  for (int i = 0; i < d; ++i) a.push_back(p[i]);
  return a;
}

std::vector<Point> parse_velocities(const json& j, int d) {
  std::vector<Point> out;
  if (j.is_object()) {
    const double lo = get_num(j, "min"), hi = get_num(j, "max"), step = get_num(j, "step");
    require(step > 0 && hi >= lo, "velocity grid needs min <= max and step > 0");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (d == 1) {
      for (int i = 0; i < n; ++i) out.push_back(Point{lo + i * step, 0.0});
    } else {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) out.push_back(Point{lo + i * step, lo + k * step});
    }
    return out;
  }
  require(j.is_array() && !j.empty(), "velocities must be a grid object or a nonempty array");
  for (const auto& v : j) out.push_back(parse_point(v, d, "velocity"));
  return out;
}

json common_defaults() {
  return json{
      {"env",
       {{"d", 1},
        {"slabs", nullptr},
        {"cell", 1.0},
        {"law", "bounded"},
        {"law_params", {{"V_max", 1.0}}},
        {"a_range", {1.0, 1.0}},
        {"seed", 0}}},
      {"model", {{"q", 2.0}, {"N1", 2.0}, {"c_shift", 0.0}}},
      {"grid", {{"dx", 0.25}, {"dt", 0.25}, {"half_width", nullptr}, {"v_cap", nullptr}}},
      {"slow", {{"c1", 1.0}}},
  };
}

json ensemble_defaults(int replicas, std::vector<double> ladder) {
  return json{{"replicas", replicas}, {"ladder", ladder}, {"auto_pad", true}};
}

json defaults_for(const std::string& cmd) {
  json c = common_defaults();
  if (cmd == "gen-env") {
    c["params"] = {{"x_min", -8.0}, {"x_max", 8.0}, {"x_step", 0.25}, {"times", {0.5, 1.5, 2.5}}};
  } else if (cmd == "verify-a2") {
    c["params"] = {{"samples", 10000}, {"seed", 12345}, {"x_extent", 64.0}, {"v_extent", 8.0}};
  } else if (cmd == "solve-metric") {
    c["params"] = {{"origin", 0.0},
                   {"t_origin", 0.0},
                   {"duration", 1.0},
                   {"layer_stride", 1},
                   {"probes", json::array({json::array({1.0, 1.0})})}};
  } else if (cmd == "path") {
    c["params"] = {{"start", 0.0},   {"t_start", 0.0},         {"end", 0.0},
                   {"duration", 64.0}, {"epsilons", {0.1, 0.25}}, {"holder_stride", 1.0}};
  } else if (cmd == "hopf-lax") {
    c["params"] = {{"initial", "min_abs_1"}, {"slope", 0.0},       {"t0", 0.0},
                   {"duration", 1.0},        {"eps", 1.0},         {"layer_stride", 1},
                   {"probes", json::array()}, {"domain", 4.0}};
  } else if (cmd == "effective") {
    c["ensemble"] = ensemble_defaults(8, {32.0, 64.0, 128.0});
    c["ensemble"]["velocities"] = {{"min", -2.0}, {"max", 2.0}, {"step", 0.25}};
    c["params"] = {{"momenta", {-0.5, -0.25, 0.0, 0.25, 0.5}}};
  } else if (cmd == "fluctuations") {
    c["ensemble"] = ensemble_defaults(100, {64.0});
    c["params"] = {{"x0", 0.0}, {"t0", 64.0}, {"lambda_points", 20}, {"lambda_max", 0.0}};
  } else if (cmd == "gap") {
    c["ensemble"] = ensemble_defaults(20, {32.0, 64.0, 128.0, 256.0});
    c["params"] = {{"v", 0.0}};
  } else if (cmd == "avg-rate") {
    c["ensemble"] = ensemble_defaults(20, {32.0, 64.0, 128.0, 256.0});
    c["params"] = {{"R", 1.0}, {"hbar0", nullptr}};
  } else if (cmd == "homog-rate") {
    c["ensemble"] = ensemble_defaults(20, {1.0});
    c["params"] = {{"eps", {0.25, 0.125, 0.0625, 0.03125, 0.015625}},
                   {"t", 1.0},
                   {"R", 1.0},
                   {"initial", "min_abs_1"},
                   {"slope", 0.0},
                   {"profile_csv", nullptr},
                   {"profile",
                    {{"replicas", 50},
                     {"ladder", {256.0}},
                     {"velocities", {{"min", -2.0}, {"max", 2.0}, {"step", 0.0625}}}}}};
  } else if (cmd == "skeleton") {
    c["grid"]["dx"] = 0.5;
    c["grid"]["dt"] = 0.5;
    c["ensemble"] = ensemble_defaults(10, {1.0});
    c["params"] = {{"x", 0.0},  {"t", 16.0},  {"n", 16.0},
                   {"oracle_replicas", 32}, {"slack_se", 2.0}, {"normalize", true}};
  } else if (cmd == "exponents") {
    c = json{{"params", {{"q", 2.0}, {"n", 10}}}};
  }
  return c;
}

// ------------------------------------------------------------- run state

struct Run {
  std::string cmd;
  json cfg;
  fs::path out;
  int workers = 1;
  int verbosity = 1;
  std::vector<std::string> files;
  json seeds = json::object();

  void log(const std::string& msg) const {
    if (verbosity > 0) std::cerr << "[" << cmd << "] " << msg << "\n";
  }

  fs::path path(const std::string& name) {
    files.push_back(name);
    return out / name;
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw ValidationError("cannot write " + (out / name).string());
    f << text;
    if (!f) throw ValidationError("failed writing " + (out / name).string());
  }

  void write_json(const std::string& name, json j) {
    j["format_version"] = kOutputFormatVersion;
    write_text(name, j.dump(2) + "\n");
  }
};

std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// JSON has no infinities; they become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ------------------------------------------------------- spec conversion

LagrangianModel model_from(const json& cfg) {
  const json& m = cfg.at("model");
  LagrangianModel model;
  model.q = get_num(m, "q");
  model.N1 = get_num(m, "N1");
  model.c_shift = get_num(m, "c_shift");
  model.validate();
  return model;
}

SlowVaryingParams slow_from(const json& cfg, const LagrangianModel& model) {
  SlowVaryingParams s;
  s.c1 = get_num(cfg.at("slow"), "c1");
  s.q = model.q;
  s.validate();
  return s;
}

// Fills env.slabs when unset so the environment covers [0, horizon].
EnvironmentSpec env_for(json& cfg, double horizon) {
  json& e = cfg.at("env");
  if (e.at("slabs").is_null()) e["slabs"] = static_cast<int>(std::ceil(horizon + 1e-9)) + 1;
  EnvironmentSpec spec = env_from_json(e);
  require(spec.slab_count >= horizon, "env.slabs = " + std::to_string(spec.slab_count) +
                                          " does not cover the run horizon " +
                                          std::to_string(horizon));
  return spec;
}

double ensemble_v_cap(const LagrangianModel& model, const Environment& env) {
  return 2.0 * std::pow(4.0 * model.N1 * (env.nu_bound() + std::fabs(model.c_shift)), 1.0 / model.q);
}

// Resolves grid.v_cap and grid.half_width (auto values are written back).
GridSpec grid_for(json& cfg, int d, double v_cap_auto, double reach_speedless, double duration) {
  json& g = cfg.at("grid");
  GridSpec grid;
  grid.d = d;
  grid.dx = get_num(g, "dx");
  grid.dt = get_num(g, "dt");
  if (g.at("v_cap").is_null()) g["v_cap"] = v_cap_auto;
  grid.v_cap = get_num(g, "v_cap");
  if (g.at("half_width").is_null()) {
    const double reach = reach_speedless + grid.v_cap * duration;
    g["half_width"] = std::max(1.0, std::ceil(reach / grid.dx + 1e-9)) * grid.dx;
  }
  grid.half_width = get_num(g, "half_width");
  grid.validate();
  return grid;
}

EnsembleSpec ensemble_for(Run& run, double horizon) {
  json& cfg = run.cfg;
  EnsembleSpec s;
  s.env = env_for(cfg, horizon);
  s.model = model_from(cfg);
  const Environment base(s.env);
  json& g = cfg.at("grid");
  if (g.at("v_cap").is_null()) g["v_cap"] = ensemble_v_cap(s.model, base);
  s.grid.d = s.env.d;
  s.grid.dx = get_num(g, "dx");
  s.grid.dt = get_num(g, "dt");
  s.grid.v_cap = get_num(g, "v_cap");
  if (!g.at("half_width").is_null()) s.grid.half_width = get_num(g, "half_width");
  const json& e = cfg.at("ensemble");
  s.auto_pad = e.at("auto_pad").get<bool>();
  s.replicas = get_int(e, "replicas");
  s.ladder = get_nums(e, "ladder");
  s.workers = run.workers;
  run.seeds["env_seed"] = s.env.seed;
  run.seeds["replica_streams"] = {0, s.replicas - 1};
  return s;
}

std::function<double(const Point&)> initial_data(const json& p, int d) {
  const std::string name = p.at("initial").get<std::string>();
  if (name == "zero") return [](const Point&) { return 0.0; };
  if (name == "abs") return [d](const Point& x) { return norm(x, d); };
  if (name == "min_abs_1") return [d](const Point& x) { return std::min(norm(x, d), 1.0); };
  if (name == "quadratic")
    return [d](const Point& x) { return 0.5 * norm(x, d) * norm(x, d); };
  if (name == "point")
    return [d](const Point& x) { return norm(x, d) < 1e-9 ? 0.0 : kInf; };
  if (name == "linear") {
    const Point s = parse_point(p.at("slope"), d, "slope");
    return [s, d](const Point& x) {
      double v = 0.0;
      for (int i = 0; i < d; ++i) v += s[i] * x[i];
      return v;
    };
  }
  throw ValidationError("unknown initial data '" + name +
                        "' (zero, abs, min_abs_1, quadratic, point, linear)");
}

// ------------------------------------------------------------ rate output

void write_rate(Run& run, const RateFit& fit, const std::string& x_name, const std::string& title,
                const std::string& deflation_note) {
  std::ostringstream csv;
  csv << x_name << ",error,mean,se,variance\n";
  for (std::size_t i = 0; i < fit.abscissae.size(); ++i) {
    auto at = [](const std::vector<double>& v, std::size_t i) {
      return i < v.size() ? csv_num(v[i]) : std::string();
    };
    csv << csv_num(fit.abscissae[i]) << "," << csv_num(fit.ordinates[i]) << ","
        << at(fit.rung_mean, i) << "," << at(fit.rung_se, i) << "," << at(fit.rung_variance, i)
        << "\n";
  }
  run.write_text("rate.csv", csv.str());

  json j;
  j["abscissa"] = x_name;
  j["slope"] = jnum(fit.slope);
  j["intercept"] = jnum(fit.intercept);
  j["residual_norm"] = jnum(fit.residual_norm);
  j["deflated_slope"] = jnum(fit.deflated_slope);
  j["deflation"] = fit.deflation;
  j["degenerate"] = fit.degenerate;
  j["proxy"] = jnum(fit.proxy);
  j["proxy_se"] = jnum(fit.proxy_se);
  j["ordering_ok"] = fit.ordering_ok;
  j["warnings"] = fit.warnings;
  run.write_json("rate.json", j);

  if (!fit.abscissae.empty()) {
    PlotSeries s;
    s.x = fit.abscissae;
    s.y = fit.ordinates;
    s.title = title;
    s.x_label = x_name;
    s.y_label = "error";
    s.caption = {deflation_note, "deflated slope " + format_slope(fit.deflated_slope)};
    emit_plot(s, PlotKind::loglog, run.path("rate.svg").string());
  }
  run.log("slope " + csv_num(fit.slope) + (fit.degenerate ? " (degenerate)" : ""));
}

// ------------------------------------------------------------ subcommands

void cmd_exponents(Run& run) {
  const json& p = run.cfg.at("params");
  const double q = get_num(p, "q");
  const int n = get_int(p, "n");
  const auto rows = exponent_sequences(q, n);
  std::ostringstream csv;
  csv << "n,a,b,g_of_a,f_of_a,l,l_closed,l_bound\n";
  json arr = json::array();
  double worst_b = 0, worst_l = 0;
  bool bound_ok = true;
  for (const auto& r : rows) {
    csv << r.n << "," << csv_num(r.a) << "," << csv_num(r.b) << "," << csv_num(r.g_of_a) << ","
        << csv_num(r.f_of_a) << "," << csv_num(r.l) << "," << csv_num(r.l_closed) << ","
        << csv_num(r.l_bound) << "\n";
    arr.push_back({{"n", r.n}, {"a", r.a}, {"b", r.b}, {"l", r.l}, {"l_closed", r.l_closed}});
    worst_b = std::max(worst_b, std::fabs(r.a - r.b));
    worst_l = std::max(worst_l, std::fabs(r.l - r.l_closed) / r.l_closed);
    if (r.n >= 1 && r.l > r.l_bound) bound_ok = false;
  }
  run.write_text("exponents.csv", csv.str());
  run.write_json("exponents.json", {{"q", q},
                                    {"n_max", n},
                                    {"max_abs_a_minus_b", worst_b},
                                    {"max_rel_l_error", worst_l},
                                    {"l_bound_holds", bound_ok},
                                    {"rows", arr}});
}

void cmd_gen_env(Run& run) {
  const json& p = run.cfg.at("params");
  const auto times = get_nums(p, "times");
  double horizon = 1.0;
  for (double t : times) horizon = std::max(horizon, std::floor(t) + 1.0);
  const EnvironmentSpec spec = env_for(run.cfg, horizon);
  const Environment env(spec);
  run.seeds["env_seed"] = spec.seed;
  const double lo = get_num(p, "x_min"), hi = get_num(p, "x_max"), step = get_num(p, "x_step");
  require(step > 0 && hi >= lo, "gen-env needs x_min <= x_max and x_step > 0");
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;

  std::ostringstream csv;
  csv << (spec.d == 1 ? "t,x,a,V\n" : "t,x,y,a,V\n");
  for (double t : times) {
    for (int i = 0; i < n; ++i) {
      if (spec.d == 1) {
        const FieldSample s = env.sample(Point{lo + i * step, 0.0}, t);
        csv << csv_num(t) << "," << csv_num(lo + i * step) << "," << csv_num(s.a) << ","
            << csv_num(s.V) << "\n";
      } else {
        for (int k = 0; k < n; ++k) {
          const FieldSample s = env.sample(Point{lo + i * step, lo + k * step}, t);
          csv << csv_num(t) << "," << csv_num(lo + i * step) << "," << csv_num(lo + k * step)
              << "," << csv_num(s.a) << "," << csv_num(s.V) << "\n";
        }
      }
    }
  }
  run.write_text("env_samples.csv", csv.str());

  std::ostringstream slabs;
  slabs << "slab,scale,nu,nu_integral_from_0\n";
  for (int j = 0; j < spec.slab_count; ++j) {
    slabs << j << "," << csv_num(env.slab_scale(j)) << "," << csv_num(env.nu_at(j + 0.5)) << ","
          << csv_num(env.nu_integral(0.0, j + 1.0 - 1e-12)) << "\n";
  }
  run.write_text("slabs.csv", slabs.str());
  run.write_json("env.json", {{"env", env_to_json(spec)},
                              {"amplitude_bound", env.amplitude_bound()},
                              {"nu_bound", env.nu_bound()}});
}

void cmd_verify_a2(Run& run) {
  const json& p = run.cfg.at("params");
  const EnvironmentSpec spec = env_for(run.cfg, 64.0);
  const Environment env(spec);
  const LagrangianModel model = model_from(run.cfg);
  A2Options o;
  o.n_samples = static_cast<std::size_t>(get_int(p, "samples"));
  o.seed = p.at("seed").get<std::uint64_t>();
  o.x_extent = get_num(p, "x_extent");
  o.v_extent = get_num(p, "v_extent");
  run.seeds["env_seed"] = spec.seed;
  run.seeds["sample_seed"] = o.seed;
  const A2Report r = verify_a2(model, env, o);
  run.write_json("a2.json", {{"samples", r.samples},
                             {"bound_violation", r.bound_violation},
                             {"bound_violations", r.bound_violations},
                             {"regularity_constant", r.regularity_constant},
                             {"regularity_violations", r.regularity_violations},
                             {"regularity_violation", r.regularity_violation},
                             {"admissible_N1", admissible_N1(spec, model.q)},
                             {"pass", r.pass}});
  run.log(r.pass ? "A2 holds on all samples" : "A2 violated");
}

json probe_values(const SpaceTimeField& f, const json& probes, int d) {
  json out = json::array();
  require(probes.is_array(), "params.probes must be an array of [x..., t]");
  for (const auto& pr : probes) {
    require(pr.is_array() && static_cast<int>(pr.size()) == d + 1,
            "each probe is [x" + std::string(d == 2 ? ", y" : "") + ", t]");
    Point x{0.0, 0.0};
    for (int i = 0; i < d; ++i) x[i] = pr[i].get<double>();
    const double t = pr[d].get<double>();
    const int k = f.layer_of(t);
    out.push_back({{"x", point_json(x, d)}, {"t", t}, {"value", jnum(f.interpolate(k, x))}});
  }
  return out;
}

void write_field(Run& run, const SpaceTimeField& f, int stride) {
  std::ostringstream csv;
  write_field_csv(csv, f, stride);
  run.write_text("field.csv", csv.str());
  std::ostringstream bin;
  write_field_binary(bin, f);
  run.write_text("field.bin", bin.str());
}

void cmd_solve_metric(Run& run) {
  json& p = run.cfg.at("params");
  const double t0 = get_num(p, "t_origin"), dur = get_num(p, "duration");
  require(dur > 0, "params.duration must be positive");
  const EnvironmentSpec spec = env_for(run.cfg, t0 + dur);
  const Environment env(spec);
  const LagrangianModel model = model_from(run.cfg);
  const Point origin = parse_point(p.at("origin"), spec.d, "origin");
  const GridSpec grid = grid_for(run.cfg, spec.d, default_v_cap(model, env, t0, t0 + dur),
                                 norm(origin, spec.d), dur);
  run.seeds["env_seed"] = spec.seed;
  SolveOptions o;
  o.workers = run.workers;
  o.keep_backpointers = false;
  const MetricField f = solve_metric_front(env, model, grid, origin, t0, dur, o);
  write_field(run, f, get_int(p, "layer_stride"));
  run.write_json("metric.json", {{"tau_quad", f.tau_quad},
                                 {"steps", f.steps},
                                 {"probes", probe_values(f, p.at("probes"), spec.d)}});
}

void cmd_path(Run& run) {
  json& p = run.cfg.at("params");
  const double t0 = get_num(p, "t_start"), dur = get_num(p, "duration");
  require(dur > 0, "params.duration must be positive");
  const EnvironmentSpec spec = env_for(run.cfg, t0 + dur);
  const Environment env(spec);
  const LagrangianModel model = model_from(run.cfg);
  const int d = spec.d;
  const Point start = parse_point(p.at("start"), d, "start");
  const Point end = parse_point(p.at("end"), d, "end");
  const GridSpec grid =
      grid_for(run.cfg, d, default_v_cap(model, env, t0, t0 + dur),
               std::max(norm(start, d), norm(end, d)), dur);
  run.seeds["env_seed"] = spec.seed;
  SolveOptions o;
  o.workers = run.workers;
  o.target_center = end;
  o.target_radius = grid.dx;
  const MetricField f = solve_metric_front(env, model, grid, start, t0, dur, o);
  const OptimalPath path = backtrace_path(f, f.steps, end);

  std::ostringstream csv;
  csv << (d == 1 ? "t,x\n" : "t,x,y\n");
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    csv << csv_num(path.times[i]) << "," << csv_num(path.positions[i][0]);
    if (d == 2) csv << "," << csv_num(path.positions[i][1]);
    csv << "\n";
  }
  run.write_text("path.csv", csv.str());

  HolderOptions h;
  h.slow = slow_from(run.cfg, model);
  h.epsilons = get_nums(p, "epsilons");
  h.stride = get_num(p, "holder_stride");
  const HolderReport rep = holder_quotients(path, env, model, h);
  json hq = json::object();
  for (std::size_t i = 0; i < rep.epsilons.size(); ++i)
    hq[csv_num(rep.epsilons[i])] = rep.holder_quotient[i];
  run.write_json("path.json", {{"value", jnum(path.value)},
                               {"action", jnum(path_action(env, model, path))},
                               {"tau_quad", f.tau_quad},
                               {"pairs", rep.pairs},
                               {"path_quotient", rep.path_quotient},
                               {"c1_needed", jnum(rep.c1_needed)},
                               {"holder_quotient", hq}});
}

void cmd_hopf_lax(Run& run) {
  json& p = run.cfg.at("params");
  const double t0 = get_num(p, "t0"), dur = get_num(p, "duration"), eps = get_num(p, "eps");
  require(dur > 0, "params.duration must be positive");
  require(eps > 0 && eps <= 1, "params.eps must lie in (0, 1]");
  const double horizon = eps < 1 ? dur / eps : t0 + dur;
  const EnvironmentSpec spec = env_for(run.cfg, horizon);
  const Environment env(spec);
  const LagrangianModel model = model_from(run.cfg);
  const int d = spec.d;
  const auto g = initial_data(p, d);
  const double domain = get_num(p, "domain");
  const double t_start = eps < 1 ? 0.0 : t0;
  const GridSpec grid = grid_for(run.cfg, d, default_v_cap(model, env, t_start, horizon),
                                 eps < 1 ? domain / eps : domain, eps < 1 ? dur / eps : dur);
  run.seeds["env_seed"] = spec.seed;
  SolveOptions o;
  o.workers = run.workers;
  o.keep_backpointers = false;
  SolutionField f = eps < 1 ? scaled_solution(env, model, eps, grid, g, dur, o)
                            : hopf_lax_solve(env, model, grid, sample_initial_data(grid, g), t0,
                                             dur, o);
  write_field(run, f, get_int(p, "layer_stride"));
  json j = {{"tau_quad", f.tau_quad},
            {"lipschitz_bound", f.lipschitz_bound},
            {"probes", probe_values(f, p.at("probes"), d)}};
  if (eps == 1.0 && f.lipschitz_bound > 0 && std::isfinite(f.lipschitz_bound)) {
    URegularityOptions ro;
    ro.slow = slow_from(run.cfg, model);
    const URegularityReport r = u_regularity_check(f, env, model, ro);
    j["regularity"] = {{"space_quotient", r.space_quotient},
                       {"time_quotient", r.time_quotient},
                       {"space_pairs", r.space_pairs},
                       {"time_checks", r.time_checks},
                       {"time_violations", r.time_violations},
                       {"worst_time_violation", r.worst_time_violation}};
  }
  run.write_json("hopf_lax.json", j);
}

void write_profile_plot(Run& run, const EffectiveProfile& ep, const std::string& name) {
  if (ep.profile.dim != 1) return;
  PlotSeries s;
  s.x = ep.profile.coords;
  s.y = ep.profile.values;
  s.err = ep.se;
  s.title = "effective Lagrangian";
  s.x_label = "v";
  s.y_label = "Lbar(v)";
  s.caption = {"t_max " + csv_num(ep.t_max) + ", replicas " + std::to_string(ep.replicas)};
  emit_plot(s, PlotKind::profile, run.path(name).string());
}

void cmd_effective(Run& run) {
  const auto ladder = get_nums(run.cfg.at("ensemble"), "ladder");
  require(!ladder.empty(), "ensemble.ladder must not be empty");
  EnsembleSpec s = ensemble_for(run, ladder.back());
  s.velocities = parse_velocities(run.cfg.at("ensemble").at("velocities"), s.env.d);
  const LagrangianModel& model = s.model;
  const EffectiveProfile ep = estimate_Lbar(s);

  std::ostringstream csv;
  write_effective_csv(csv, ep);
  run.write_text("effective.csv", csv.str());
  write_profile_plot(run, ep, "profile.svg");

  std::ostringstream hcsv;
  hcsv << "p,hbar,argmax,cap,coercive\n";
  json hb = json::array();
  for (const auto& pj : run.cfg.at("params").at("momenta")) {
    const Point pt = parse_point(pj, s.env.d, "momentum");
    try {
      const HbarEstimate h = estimate_Hbar(ep.profile, pt, model);
      hcsv << csv_num(pt[0]) << "," << csv_num(h.value) << "," << csv_num(h.argmax[0]) << ","
           << csv_num(h.cap) << "," << (h.coercive ? 1 : 0) << "\n";
      hb.push_back({{"p", point_json(pt, s.env.d)},
                    {"value", h.value},
                    {"coercive", h.coercive},
                    {"coercivity_margin", h.coercivity_margin}});
    } catch (const ValidationError& e) {
      // widen the velocity grid to cover this momentum
      run.log(std::string("skipping p = ") + csv_num(pt[0]) + ": " + e.what());
      hcsv << csv_num(pt[0]) << ",nan,nan,nan,0\n";
      hb.push_back({{"p", point_json(pt, s.env.d)}, {"value", nullptr}, {"error", e.what()}});
    }
  }
  run.write_text("hbar.csv", hcsv.str());

  double l0 = kInf;
  for (std::size_t i = 0; i < ep.profile.size(); ++i)
    if (norm(ep.profile.point(i), s.env.d) < 1e-12) l0 = ep.profile.values[i];
  json j = {{"t_max", ep.t_max}, {"replicas", ep.replicas}, {"hbar", hb}};
  if (std::isfinite(l0)) {
    j["lbar_at_zero"] = l0;
    j["normalizing_shift"] = normalizing_shift(l0);
  }
  run.write_json("effective.json", j);
}

void cmd_fluctuations(Run& run) {
  const json& p = run.cfg.at("params");
  const double t0 = get_num(p, "t0");
  EnsembleSpec s = ensemble_for(run, t0);
  const Point x0 = parse_point(p.at("x0"), s.env.d, "x0");
  FluctuationOptions o;
  o.slow = slow_from(run.cfg, s.model);
  o.lambda_points = get_int(p, "lambda_points");
  o.lambda_max = get_num(p, "lambda_max");
  const ConcentrationReport r = fluctuation_stats(s, x0, t0, o);

  std::ostringstream vals;
  vals << "replica,value,z\n";
  for (std::size_t i = 0; i < r.values.size(); ++i)
    vals << i << "," << csv_num(r.values[i]) << "," << csv_num(r.z[i]) << "\n";
  run.write_text("values.csv", vals.str());

  std::ostringstream tail;
  tail << "lambda,tail\n";
  for (std::size_t i = 0; i < r.lambda.size(); ++i)
    tail << csv_num(r.lambda[i]) << "," << csv_num(r.tail[i]) << "\n";
  run.write_text("tail.csv", tail.str());

  json j = {{"x0", point_json(x0, s.env.d)},
            {"t0", t0},
            {"mean", r.mean},
            {"variance", r.variance},
            {"scale", r.scale},
            {"C0", r.C0},
            {"tail_case", r.tail_case == TailCase::bounded ? "bounded" : "exponential"},
            {"deterministic", r.deterministic}};
  if (r.fit) j["fit"] = {{"slope", r.fit->slope}, {"intercept", r.fit->intercept},
                         {"points", r.fit->points}};
  run.write_json("fluctuations.json", j);

  if (!r.lambda.empty()) {
    PlotSeries ps;
    ps.x = r.lambda;
    ps.y = r.tail;
    ps.title = "tail of |Z|";
    ps.x_label = "lambda";
    ps.y_label = "P(|Z| > lambda)";
    ps.caption = {"t0 " + csv_num(t0) + ", replicas " + std::to_string(s.replicas)};
    emit_plot(ps, PlotKind::tail, run.path("tail.svg").string());
  }
}

void cmd_gap(Run& run) {
  const auto ladder = get_nums(run.cfg.at("ensemble"), "ladder");
  require(!ladder.empty(), "ensemble.ladder must not be empty");
  EnsembleSpec s = ensemble_for(run, ladder.back());
  const Point v = parse_point(run.cfg.at("params").at("v"), s.env.d, "v");
  const RateFit fit = deterministic_gap(s, v, slow_from(run.cfg, s.model));
  write_rate(run, fit, "t", "deterministic gap", "deflation " + fit.deflation);
}

void cmd_avg_rate(Run& run) {
  const auto ladder = get_nums(run.cfg.at("ensemble"), "ladder");
  require(!ladder.empty(), "ensemble.ladder must not be empty");
  EnsembleSpec s = ensemble_for(run, ladder.back());
  const json& p = run.cfg.at("params");
  std::optional<double> hbar0;
  if (!p.at("hbar0").is_null()) hbar0 = get_num(p, "hbar0");
  const RateFit fit =
      large_time_average_error(s, get_num(p, "R"), hbar0, slow_from(run.cfg, s.model));
  write_rate(run, fit, "t", "large-time average error", "deflation " + fit.deflation);
}

void cmd_homog_rate(Run& run) {
  json& p = run.cfg.at("params");
  const auto eps = get_nums(p, "eps");
  require(!eps.empty(), "params.eps must not be empty");
  const double t = get_num(p, "t");
  const double eps_min = *std::min_element(eps.begin(), eps.end());
  require(eps_min > 0, "params.eps entries must be positive");
  double horizon = t / eps_min;
  const json& prof = p.at("profile");
  if (p.at("profile_csv").is_null()) {
    const auto pl = get_nums(prof, "ladder");
    require(!pl.empty(), "params.profile.ladder must not be empty");
    horizon = std::max(horizon, pl.back());
  }
  EnsembleSpec s = ensemble_for(run, horizon);

  ConvexProfile lbar;
  if (!p.at("profile_csv").is_null()) {
    std::ifstream in(p.at("profile_csv").get<std::string>());
    require(static_cast<bool>(in), "cannot read profile_csv");
    lbar = read_profile_csv(in);
  } else {
    EnsembleSpec ps = s;
    ps.replicas = get_int(prof, "replicas");
    ps.ladder = get_nums(prof, "ladder");
    ps.velocities = parse_velocities(prof.at("velocities"), s.env.d);
    const EffectiveProfile ep = estimate_Lbar(ps);
    std::ostringstream csv;
    write_effective_csv(csv, ep);
    run.write_text("profile.csv", csv.str());
    write_profile_plot(run, ep, "profile.svg");
    lbar = ep.profile;
  }
  const auto g = initial_data(p, s.env.d);
  const RateFit fit =
      homog_error_curve(s, lbar, g, eps, t, get_num(p, "R"), slow_from(run.cfg, s.model));
  write_rate(run, fit, "eps", "homogenization error", "deflation " + fit.deflation);
}

void cmd_skeleton(Run& run) {
  json& p = run.cfg.at("params");
  const double t = get_num(p, "t"), n = get_num(p, "n");
  require(t > 1 && n >= 1, "skeleton needs t > 1 and n >= 1");
  EnsembleSpec s = ensemble_for(run, n * t + 2.0);
  const int d = s.env.d;
  const Point x = parse_point(p.at("x"), d, "x");
  const SlowVaryingParams slow = slow_from(run.cfg, s.model);
  QOracleOptions qo;
  qo.replicas = get_int(p, "oracle_replicas");
  qo.slack_se = get_num(p, "slack_se");
  qo.normalize = p.at("normalize").get<bool>();
  run.seeds["oracle_streams"] = {qo.replica_offset, qo.replica_offset + qo.replicas - 1};
  const QSetOracle oracle = calibrate_q_oracle(s, x, t, slow, qo);

  Point end{n * x[0], n * x[1]};
  GridSpec grid = s.padded_grid(norm(end, d) + s.grid.v_cap * n * t, "skeleton path");
  std::ostringstream csv;
  csv << "replica,k,good,E,L,S,none,k_within_10n,e_within_2n\n";
  json list = json::array();
  int within = 0, e_ok = 0;
  for (int i = 0; i < s.replicas; ++i) {
    const Environment env = s.replica(i);
    SolveOptions o;
    o.workers = run.workers;
    o.target_center = end;
    o.target_radius = grid.dx;
    const MetricField f = solve_metric_front(env, s.model, grid, Point{0.0, 0.0}, 0.0, n * t, o);
    const OptimalPath path = backtrace_path(f, f.steps, end);
    Skeleton sk = extract_good_skeleton(path, oracle, x, t, n);
    const SkeletonCensus c = skeleton_census(sk, x, t, n, oracle);
    within += c.k_within_10n;
    e_ok += c.e_within_2n;
    csv << i << "," << c.k << "," << (sk.good ? 1 : 0) << "," << c.count_E << "," << c.count_L
        << "," << c.count_S << "," << c.count_none << "," << (c.k_within_10n ? 1 : 0) << ","
        << (c.e_within_2n ? 1 : 0) << "\n";
    json verts = json::array(), flags = json::array();
    for (std::size_t j = 0; j < sk.vertices.size(); ++j)
      verts.push_back({{"y", point_json(sk.vertices[j], d)}, {"s", sk.times[j]}});
    for (std::size_t j = 0; j < c.flags.size(); ++j)
      flags.push_back({{"flag", to_string(c.flags[j])}, {"inefficiency", jnum(c.inefficiency[j])}});
    list.push_back({{"replica", i},
                    {"good", sk.good},
                    {"demotion", sk.demotion},
                    {"vertices", verts},
                    {"increments", flags}});
  }
  run.write_text("census.csv", csv.str());
  run.write_json("skeletons.json", {{"skeletons", list}});
  run.write_json("skeleton.json",
                 {{"x", point_json(x, d)},
                  {"t", t},
                  {"n", n},
                  {"replicas", s.replicas},
                  {"oracle",
                   {{"mbar", oracle.mbar},
                    {"mbar_se", oracle.mbar_se},
                    {"ell_y", point_json(oracle.ell_y, d)},
                    {"ell_s", oracle.ell_s},
                    {"gap", oracle.gap},
                    {"shift", oracle.shift},
                    {"opening", oracle.cone.opening()}}},
                  {"fraction_k_within_10n", static_cast<double>(within) / s.replicas},
                  {"fraction_e_within_2n", static_cast<double>(e_ok) / s.replicas}});
}

using Handler = void (*)(Run&);

struct Command {
  const char* name;
  const char* help;
  Handler handler;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"gen-env", "sample an environment and its per-slab envelope", cmd_gen_env},
      {"verify-a2", "Monte Carlo check of the growth and modulus conditions", cmd_verify_a2},
      {"solve-metric", "metric front m(origin; x, t) on a space-time grid", cmd_solve_metric},
      {"path", "optimal path between two points plus path regularity quotients", cmd_path},
      {"hopf-lax", "solution u of the HJ equation from initial data", cmd_hopf_lax},
      {"effective", "effective Lagrangian profile and Hbar at given momenta", cmd_effective},
      {"fluctuations", "ensemble fluctuations and tail of the normalized metric", cmd_fluctuations},
      {"gap", "deterministic gap E m(tv,t) - t Lbar(v) along a ladder", cmd_gap},
      {"avg-rate", "large-time average error of u(x,t)/t", cmd_avg_rate},
      {"homog-rate", "homogenization error sup |u^eps - ubar| over an eps ladder", cmd_homog_rate},
      {"skeleton", "good-skeleton extraction and increment census", cmd_skeleton},
      {"exponents", "exponent sequences a_n, b_n, l_n", cmd_exponents},
  };
  return cmds;
}

void write_manifest(Run& run) {
  json m;
  m["format_version"] = kOutputFormatVersion;
  m["tool"] = "hjlab";
  m["version"] = kVersion;
  m["field_format_version"] = kFieldFormatVersion;
  m["subcommand"] = run.cmd;
  m["seeds"] = run.seeds;
  m["workers"] = run.workers;
  m["files"] = run.files;
  std::ofstream f(run.out / "manifest.json", std::ios::binary);
  if (!f) throw ValidationError("cannot write manifest in " + run.out.string());
  f << m.dump(2) << "\n";
}

}  // namespace

EnvironmentSpec env_from_json(const json& j) {
  require(j.is_object(), "env must be a JSON object");
  static const std::set<std::string> keys = {"d",          "slabs",    "cell", "law",
                                             "law_params", "a_range", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(keys.count(it.key()) > 0, "unknown env key '" + it.key() + "'");
  EnvironmentSpec s;
  if (j.contains("d")) s.d = j["d"].get<int>();
  if (j.contains("slabs") && !j["slabs"].is_null()) s.slab_count = j["slabs"].get<int>();
  if (j.contains("cell")) s.cell_size = j["cell"].get<double>();
  if (j.contains("law")) s.law = amplitude_law_from_string(j["law"].get<std::string>());
  if (j.contains("a_range")) {
    require(j["a_range"].is_array() && j["a_range"].size() == 2, "a_range must be [a_min, a_max]");
    s.a_min = j["a_range"][0].get<double>();
    s.a_max = j["a_range"][1].get<double>();
  }
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("law_params")) {
    const json& lp = j["law_params"];
    require(lp.is_object(), "law_params must be an object");
    std::set<std::string> allowed;
    switch (s.law) {
      case AmplitudeLaw::bounded:
        allowed = {"V_max"};
        if (lp.contains("V_max")) s.law_param = lp["V_max"].get<double>();
        break;
      case AmplitudeLaw::exponential_tail:
        allowed = {"rate"};
        if (lp.contains("rate")) s.law_param = lp["rate"].get<double>();
        break;
      case AmplitudeLaw::periodic:
        allowed = {"amplitude", "period"};
        if (lp.contains("amplitude")) s.law_param = lp["amplitude"].get<double>();
        if (lp.contains("period")) s.period = lp["period"].get<double>();
        break;
    }
    for (auto it = lp.begin(); it != lp.end(); ++it)
      require(allowed.count(it.key()) > 0,
              "law_params key '" + it.key() + "' does not apply to law " + to_string(s.law));
  }
  s.validate();
  return s;
}

json env_to_json(const EnvironmentSpec& s) {
  json lp;
  switch (s.law) {
    case AmplitudeLaw::bounded: lp = {{"V_max", s.law_param}}; break;
    case AmplitudeLaw::exponential_tail: lp = {{"rate", s.law_param}}; break;
    case AmplitudeLaw::periodic: lp = {{"amplitude", s.law_param}, {"period", s.period}}; break;
  }
  return {{"d", s.d},           {"slabs", s.slab_count},         {"cell", s.cell_size},
          {"law", to_string(s.law)}, {"law_params", lp}, {"a_range", {s.a_min, s.a_max}},
          {"seed", s.seed}};
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : commands()) v.push_back(c.name);
    return v;
  }();
  return names;
}

std::string usage() {
  std::ostringstream os;
  os << "usage: hjlab <subcommand> [--config FILE] [--set key=value]... [--out DIR] "
        "[--workers N] [-v|--quiet]\n\nsubcommands:\n";
  for (const auto& c : commands()) os << "  " << std::left << std::setw(14) << c.name << c.help << "\n";
  os << "\nRun 'hjlab <subcommand> --help' for flags. Exit codes: 0 ok, 1 validation error, "
        "2 numeric error, 64 usage.\n";
  return os.str();
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& argv) {
  if (argv.size() < 2) {
    std::cerr << usage();
    return kExitUsage;
  }
  const std::string name = argv[1];
  if (name == "--help" || name == "-h" || name == "help") {
    std::cout << usage();
    return kExitOk;
  }
  if (name == "--version") {
    std::cout << "hjlab " << kVersion << "\n";
    return kExitOk;
  }
  const auto cit = std::find_if(commands().begin(), commands().end(),
                                [&](const Command& c) { return name == c.name; });
  if (cit == commands().end()) {
    std::cerr << "unknown subcommand '" << name << "'\n\n" << usage();
    return kExitUsage;
  }

  CLI::App app{cit->help, "hjlab " + name};
  std::string config_path, out_dir = "hjlab_out/" + name;
  std::vector<std::string> sets;
  int workers = 1;
  bool verbose = false, quiet = false;
  std::optional<int> replicas, n_flag;
  std::optional<double> q_flag;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file (no comments)");
  app.add_option("--set", sets, "override a config key, e.g. --set env.seed=7 (repeatable)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--workers", workers, "worker threads; results do not depend on it")
      ->capture_default_str();
  app.add_flag("-v,--verbose", verbose, "more progress output");
  app.add_flag("--quiet", quiet, "no progress output");
  if (name == "exponents") {
    app.add_option("--q", q_flag, "exponent q > 1 (params.q)");
    app.add_option("--n", n_flag, "largest index n (params.n)");
  } else {
    app.add_option("--seed", seed, "master environment seed (env.seed)");
  }
  const json defaults = defaults_for(name);
  if (defaults.contains("ensemble"))
    app.add_option("--replicas", replicas, "ensemble size M (ensemble.replicas)");
  std::string sections;
  for (auto it = defaults.begin(); it != defaults.end(); ++it)
    sections += (sections.empty() ? "" : ", ") + it.key();
  app.footer("Config sections: " + sections +
             ". The resolved config is echoed to config.json in the output directory.\n"
             "Default config:\n" + defaults.dump(2));

  std::vector<std::string> rest(argv.begin() + 2, argv.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "hjlab " << name << ": " << e.what() << "\n";
    return kExitValidation;
  }

  Run r;
  r.cmd = name;
  r.workers = workers;
  r.verbosity = quiet ? 0 : (verbose ? 2 : 1);
  try {
    require(workers >= 1, "--workers must be >= 1");
    r.cfg = defaults_for(name);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      require(static_cast<bool>(in), "cannot read config " + config_path);
      json file = json::parse(in, nullptr, false, /*ignore_comments=*/false);
      require(!file.is_discarded(), "config " + config_path + " is not valid JSON");
      merge_into(r.cfg, file, "");
    }
    for (const auto& s : sets) apply_set(r.cfg, s);
    if (q_flag) r.cfg["params"]["q"] = *q_flag;
    if (n_flag) r.cfg["params"]["n"] = *n_flag;
    if (seed) r.cfg["env"]["seed"] = *seed;
    if (replicas) r.cfg["ensemble"]["replicas"] = *replicas;

    r.out = out_dir;
    std::error_code ec;
    fs::create_directories(r.out, ec);
    require(!ec && fs::is_directory(r.out), "cannot create output directory " + out_dir);

    cit->handler(r);

    // Echo of the resolved config (auto values filled in by the handler).
    json echo = r.cfg;
    echo["format_version"] = kOutputFormatVersion;
    echo["subcommand"] = name;
    {
      std::ofstream f(r.out / "config.json", std::ios::binary);
      if (!f) throw ValidationError("cannot write config echo");
      f << echo.dump(2) << "\n";
    }
    write_manifest(r);
    r.log("wrote " + r.out.string());
    return kExitOk;
  } catch (const NumericError& e) {
    std::cerr << "hjlab " << name << ": numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ValidationError& e) {
    std::cerr << "hjlab " << name << ": invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "hjlab " << name << ": invalid config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "hjlab " << name << ": error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace hjlab::cli
