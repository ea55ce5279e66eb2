#include "affsls/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace affsls {
namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 180.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 30.0;
constexpr double kGap = 40.0;

struct Style {
  const char* color;
  const char* dash;
  double width;
};

// Wide solid underneath, dashes on top, so coinciding curves stay visible.
constexpr Style kStyles[] = {
    {"#1f77b4", "", 4.0},
    {"#d62728", "8,5", 2.0},
    {"#2ca02c", "2,4", 2.0},
    {"#9467bd", "12,3,2,3", 1.5},
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Channel c of log sample k: states first, then inputs.
bool sample(const ClosedLoopLog& log, Index n, Index c, size_t k, double& out) {
  if (c < n) {
    if (k >= log.x.size()) return false;
    out = log.x[k](c);
  } else {
    if (k >= log.u.size()) return false;
    out = log.u[k](c - n);
  }
  return true;
}

}  // namespace

std::string render_svg(const std::vector<ClosedLoopLog>& logs,
                       const std::vector<std::string>& labels) {
  if (logs.empty() || logs[0].x.empty() || logs[0].u.empty()) {
    throw std::invalid_argument("render_svg: nothing to plot");
  }
  const Index n = logs[0].x[0].size(), m = logs[0].u[0].size();
  const Index channels = n + m;
  if (!labels.empty() && static_cast<Index>(labels.size()) != channels) {
    throw std::invalid_argument("render_svg: need one label per channel");
  }
  size_t steps = 0;
  for (const auto& log : logs) steps = std::max(steps, log.x.size());
  const double t_max = std::max<double>(1.0, static_cast<double>(steps) - 1.0);
  const double plot_w = kWidth - kLeft - kRight;
  const double height = kTop + channels * (kPanelHeight + kGap);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (Index c = 0; c < channels; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& log : logs) {
      for (size_t k = 0; k < steps; ++k) {
        double v;
        if (sample(log, n, c, k, v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    const double pad = hi > lo ? 0.08 * (hi - lo) : 0.5;
    lo -= pad;
    hi += pad;
    const double top = kTop + c * (kPanelHeight + kGap);
    auto X = [&](double t) { return kLeft + plot_w * t / t_max; };
    auto Y = [&](double v) { return top + kPanelHeight * (hi - v) / (hi - lo); };

    std::string title = labels.empty()
                            ? (c < n ? "x" + std::to_string(c + 1)
                                     : "u" + std::to_string(c - n + 1))
                            : labels[c];
    svg << "<text x=\"" << kLeft << "\" y=\"" << top - 8 << "\" font-weight=\"bold\">"
        << title << "</text>\n";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w
        << "\" height=\"" << kPanelHeight << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = lo + (hi - lo) * i / 4.0;
      svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << Y(v)
          << "\" y2=\"" << Y(v) << "\" stroke=\"#ddd\"/>\n";
      svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << Y(v) + 4
          << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    const int tick = std::max(1, static_cast<int>(t_max) / 5);
    for (int t = 0; t <= static_cast<int>(t_max); t += tick) {
      svg << "<text x=\"" << X(t) << "\" y=\"" << top + kPanelHeight + 15
          << "\" text-anchor=\"middle\">" << t << "</text>\n";
    }

    for (size_t l = 0; l < logs.size(); ++l) {
      const Style& st = kStyles[l % std::size(kStyles)];
      svg << "<polyline fill=\"none\" stroke=\"" << st.color << "\" stroke-width=\""
          << st.width << "\"";
      if (*st.dash) svg << " stroke-dasharray=\"" << st.dash << "\"";
      svg << " points=\"";
      for (size_t k = 0; k < steps; ++k) {
        double v;
        if (!sample(logs[l], n, c, k, v)) break;
        // Inputs are held over each step.
        if (c >= n) {
          svg << X(k) << ',' << Y(v) << ' ' << X(k + 1) << ',' << Y(v) << ' ';
        } else {
          svg << X(k) << ',' << Y(v) << ' ';
        }
      }
      svg << "\"/>\n";
    }
  }

  for (size_t l = 0; l < logs.size(); ++l) {
    const Style& st = kStyles[l % std::size(kStyles)];
    const double y = kTop + 10 + 20.0 * l;
    const double x = kWidth - kRight + 15;
    svg << "<line x1=\"" << x << "\" x2=\"" << x + 30 << "\" y1=\"" << y << "\" y2=\""
        << y << "\" stroke=\"" << st.color << "\" stroke-width=\"" << st.width << "\"";
    if (*st.dash) svg << " stroke-dasharray=\"" << st.dash << "\"";
    svg << "/>\n<text x=\"" << x + 36 << "\" y=\"" << y + 4 << "\">" << logs[l].controller
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\">step</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace affsls
