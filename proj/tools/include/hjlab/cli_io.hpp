#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "hjlab/env_field.hpp"
#include "hjlab/lagrangian.hpp"

namespace hjlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitUsage = 64;

inline constexpr int kOutputFormatVersion = 1;

// argv[0] is the program name, argv[1] the subcommand.
int run(const std::vector<std::string>& argv);
int run(int argc, const char* const* argv);

const std::vector<std::string>& subcommands();
std::string usage();

enum class PlotKind { loglog, tail, profile };

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // profile error bars (optional)
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> caption;  // parameter lines under the plot
};

struct PlotResult {
  bool has_fit = false;
  double slope = 0.0;
  double intercept = 0.0;
};

// Writes a standalone SVG. Throws ValidationError on an empty series or an
// unwritable path; nothing is written in either case.
PlotResult emit_plot(const PlotSeries& series, PlotKind kind, const std::string& path);

// "-0.50" style with a real minus sign.
std::string format_slope(double slope);

EnvironmentSpec env_from_json(const nlohmann::json& j);
nlohmann::json env_to_json(const EnvironmentSpec& spec);

}  // namespace hjlab::cli
