#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hjlab/cli_io.hpp"
#include "hjlab/errors.hpp"
#include "hjlab/stats.hpp"

namespace hjlab::cli {

namespace {

constexpr double kW = 640, kH = 480;
constexpr double kLeft = 80, kRight = 30, kTop = 40, kBottom = 70;

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  void fit(const std::vector<double>& v) {
    lo = *std::min_element(v.begin(), v.end());
    hi = *std::max_element(v.begin(), v.end());
    if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  double frac(double v) const { return (v - lo) / (hi - lo); }
  std::string label(double v) const { return log ? num(std::pow(10.0, v), 3) : num(v, 3); }
};

}  // namespace

std::string format_slope(double slope) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", std::fabs(slope));
  // U+2212 for negatives; "-0.00" never shows up.
  const bool neg = slope < 0 && std::string(buf) != "0.00";
  return (neg ? std::string("\xE2\x88\x92") : std::string()) + buf;
}

PlotResult emit_plot(const PlotSeries& series, PlotKind kind, const std::string& path) {
  require(!series.x.empty() && series.x.size() == series.y.size(),
          "plot series must be nonempty with matching x and y");
  require(series.err.empty() || series.err.size() == series.y.size(),
          "plot error bars must match the series length");

  std::vector<double> px, py, pe;
  Axis ax, ay;
  if (kind == PlotKind::loglog) {
    ax.log = ay.log = true;
    for (std::size_t i = 0; i < series.x.size(); ++i) {
      if (series.x[i] > 0 && series.y[i] > 0) {
        px.push_back(std::log10(series.x[i]));
        py.push_back(std::log10(series.y[i]));
      }
    }
    require(!px.empty(), "loglog plot needs at least one positive point");
  } else if (kind == PlotKind::tail) {
    bool any_positive = std::any_of(series.y.begin(), series.y.end(), [](double v) { return v > 0; });
    ay.log = any_positive;
    for (std::size_t i = 0; i < series.x.size(); ++i) {
      if (ay.log && series.y[i] <= 0) continue;
      px.push_back(series.x[i]);
      py.push_back(ay.log ? std::log10(series.y[i]) : series.y[i]);
    }
  } else {
    px = series.x;
    py = series.y;
    pe = series.err;
  }

  std::vector<double> yr = py;
  for (std::size_t i = 0; i < pe.size(); ++i) {
    yr.push_back(py[i] - pe[i]);
    yr.push_back(py[i] + pe[i]);
  }
  ax.fit(px);
  ay.fit(yr);

  PlotResult res;
  if (kind == PlotKind::loglog && px.size() >= 2) {
    const LineFit f = fit_line(px, py);
    res.has_fit = true;
    res.slope = f.slope;
    res.intercept = f.intercept;
  }

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double extra = 16.0 * static_cast<double>(series.caption.size() + (res.has_fit ? 1 : 0));
  auto sx = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto sy = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH + extra
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!series.title.empty())
    os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(series.title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double vx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double vy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    os << "<line x1=\"" << sx(vx) << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx(vx) << "\" y2=\""
       << kTop + ph + 5 << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << sx(vx) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
       << ax.label(vx) << "</text>\n"
       << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy(vy) << "\" x2=\"" << kLeft << "\" y2=\""
       << sy(vy) << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(vy) + 4 << "\" text-anchor=\"end\">"
       << ay.label(vy) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kTop + ph + 38
     << "\" text-anchor=\"middle\">" << escape(series.x_label) << (ax.log ? " (log)" : "")
     << "</text>\n"
     << "<text transform=\"translate(18," << kTop + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(series.y_label)
     << (ay.log ? " (log)" : "") << "</text>\n";

  if (kind != PlotKind::loglog && px.size() >= 2) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) os << sx(px[i]) << "," << sy(py[i]) << " ";
    os << "\"/>\n";
  }
  for (std::size_t i = 0; i < pe.size(); ++i) {
    os << "<line class=\"errbar\" data-err=\"" << num(pe[i], 17) << "\" x1=\"" << sx(px[i])
       << "\" y1=\"" << sy(py[i] - pe[i]) << "\" x2=\"" << sx(px[i]) << "\" y2=\""
       << sy(py[i] + pe[i]) << "\" stroke=\"gray\"/>\n";
  }
  for (std::size_t i = 0; i < px.size(); ++i)
    os << "<circle cx=\"" << sx(px[i]) << "\" cy=\"" << sy(py[i])
       << "\" r=\"3\" fill=\"steelblue\"/>\n";

  double cy = kH + 4;
  if (res.has_fit) {
    const double x0 = ax.lo, x1 = ax.hi;
    os << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(res.intercept + res.slope * x0) << "\" x2=\""
       << sx(x1) << "\" y2=\"" << sy(res.intercept + res.slope * x1)
       << "\" stroke=\"firebrick\" stroke-dasharray=\"6,3\"/>\n"
       << "<text x=\"" << kLeft + pw - 6 << "\" y=\"" << kTop + 16
       << "\" text-anchor=\"end\" fill=\"firebrick\">slope " << format_slope(res.slope)
       << "</text>\n";
    os << "<text x=\"" << kLeft << "\" y=\"" << cy << "\">fitted slope " << format_slope(res.slope)
       << "</text>\n";
    cy += 16;
  }
  for (const auto& line : series.caption) {
    os << "<text x=\"" << kLeft << "\" y=\"" << cy << "\">" << escape(line) << "</text>\n";
    cy += 16;
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write plot to " + path);
  f << os.str();
  if (!f) throw ValidationError("failed writing plot to " + path);
  return res;
}

}  // namespace hjlab::cli
