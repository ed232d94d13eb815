#pragma once

#include <cstddef>
#include <vector>

namespace hjlab {

// Reductions run left to right in input order, so equal inputs give
// bitwise-equal outputs.
double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);
double standard_error(const std::vector<double>& xs);
double median(std::vector<double> xs);
double correlation(const std::vector<double>& xs, const std::vector<double>& ys);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_norm = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x; needs >= 2 distinct x.
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);
// Asymptotic critical value at level alpha (0.01 or 0.05).
double ks_critical(std::size_t n, std::size_t m, double alpha = 0.01);

}  // namespace hjlab
