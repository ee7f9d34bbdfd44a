#include "gflow/plot.hpp"

#include "gflow/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gflow {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 20, kTop = 40, kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_log_plot(const std::string& title, const std::vector<PlotSeries>& series) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      if (s.y[i] > 0.0 && std::isfinite(s.y[i])) {
        y_lo = std::min(y_lo, s.y[i]);
        y_hi = std::max(y_hi, s.y[i]);
      }
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (!std::isfinite(y_lo)) y_lo = 1e-3, y_hi = 1;
  double ly_lo = std::floor(std::log10(y_lo)), ly_hi = std::ceil(std::log10(y_hi));
  if (ly_hi <= ly_lo) ly_hi = ly_lo + 1;
  const double floor_value = std::pow(10.0, ly_lo);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, floor_value));
    return kTop + (ly_hi - ly) / (ly_hi - ly_lo) * ph;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth) + "\" height=\"" + fixed(kHeight) +
         "\" viewBox=\"0 0 " + fixed(kWidth) + " " + fixed(kHeight) + "\">\n";
  out += "<title>" + escape(title) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fixed(kWidth) + "\" height=\"" + fixed(kHeight) + "\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         escape(title) + "</text>\n";
  out += "<g stroke=\"#444\" fill=\"none\"><rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" +
         fixed(pw) + "\" height=\"" + fixed(ph) + "\"/></g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (double d = ly_lo; d <= ly_hi + 0.5; d += 1.0) {
    const double y = kTop + (ly_hi - d) / (ly_hi - ly_lo) * ph;
    out += "<line x1=\"" + fixed(kLeft) + "\" y1=\"" + fixed(y) + "\" x2=\"" + fixed(kLeft + pw) + "\" y2=\"" + fixed(y) +
           "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(y + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(static_cast<int>(d)) + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / 4.0;
    out += "<text x=\"" + fixed(px(x)) + "\" y=\"" + fixed(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           format_double(std::round(x * 1e6) / 1e6) + "</text>\n";
  }
  out += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"" + fixed(kHeight - 10) + "\" text-anchor=\"middle\">t</text>\n";
  out += "</g>\n";

  std::size_t colour = 0;
  for (const auto& s : series) {
    std::string points, values;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) {
        points += ' ';
        values += ' ';
      }
      points += fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
      values += format_double(s.y[i]);
    }
    const char* stroke = kPalette[colour++ % std::size(kPalette)];
    out += "<polyline data-name=\"" + escape(s.name) + "\" data-values=\"" + values + "\" fill=\"none\" stroke=\"" +
           stroke + "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + points +
           "\"/>\n";
  }
  // Legend.
  colour = 0;
  double ly = kTop + 14;
  for (const auto& s : series) {
    const char* stroke = kPalette[colour++ % std::size(kPalette)];
    out += "<text x=\"" + fixed(kLeft + pw - 8) + "\" y=\"" + fixed(ly) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + stroke + "\">" +
           escape(s.name) + "</text>\n";
    ly += 14;
  }
  out += "</svg>\n";
  return out;
}

std::vector<PlotSeries> read_plot_series(const std::string& svg) {
  std::vector<PlotSeries> out;
  std::size_t pos = 0;
  auto attr = [&](std::size_t from, std::size_t to, const std::string& name) -> std::string {
    const std::string key = name + "=\"";
    const std::size_t a = svg.find(key, from);
    if (a == std::string::npos || a > to) return {};
    const std::size_t b = svg.find('"', a + key.size());
    return svg.substr(a + key.size(), b - a - key.size());
  };
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    const std::size_t end = svg.find("/>", pos);
    PlotSeries s;
    s.name = attr(pos, end, "data-name");
    std::istringstream vals(attr(pos, end, "data-values"));
    std::string tok;
    while (vals >> tok) s.y.push_back(parse_double(tok));
    std::istringstream pts(attr(pos, end, "points"));
    while (pts >> tok) s.x.push_back(parse_double(tok.substr(0, tok.find(','))));
    out.push_back(std::move(s));
    pos = end;
  }
  return out;
}

}  // namespace gflow
