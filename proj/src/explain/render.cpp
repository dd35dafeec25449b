#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "../common/manifest.hpp"
#include "tsc/error.hpp"
#include "tsc/explain.hpp"

namespace tsc::explain {

namespace {

std::string num(double v) {
  char buf[32];
  return {buf, std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2).ptr};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

// Tableau-like categorical palette; repeats after ten classes.
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string ramp_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = int(std::lround(255 * v)), b = 255 - r;
  return "rgb(" + std::to_string(r) + ",0," + std::to_string(b) + ")";
}

std::string export_cam_svg(const Tensor& series, std::span<const double> normalized) {
  if (series.rank() != 2) throw ShapeError("series must be [T, M], got " + to_string(series.shape()));
  const std::size_t T = series.dim(0), M = series.dim(1);
  if (normalized.size() != T) throw ShapeError("CAM length differs from series length");
  const double width = 640, height = 240, pad = 20;
  const auto [lo_it, hi_it] = std::minmax_element(series.values().begin(), series.values().end());
  const double lo = *lo_it, range = *hi_it - *lo_it > 0 ? *hi_it - *lo_it : 1.0;
  auto x_of = [&](std::size_t t) { return pad + (T > 1 ? double(t) / double(T - 1) : 0.5) * (width - 2 * pad); };
  auto y_of = [&](double v) { return height - pad - (v - lo) / range * (height - 2 * pad); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                  "\">\n";
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double c = 0.5 * (normalized[t] + normalized[t + 1]);
      s += "<line class=\"segment\" x1=\"" + num(x_of(t)) + "\" y1=\"" + num(y_of(series.at(t, m))) + "\" x2=\"" +
           num(x_of(t + 1)) + "\" y2=\"" + num(y_of(series.at(t + 1, m))) + "\" stroke=\"" + ramp_color(c) +
           "\" stroke-width=\"2\"/>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

std::string export_mds_svg(const MdsEmbedding& e, std::span<const std::size_t> labels,
                           const std::vector<std::string>& vocabulary) {
  const std::size_t n = e.points.dim(0);
  if (labels.size() != n) throw ShapeError("one label per embedded point is required");
  const double width = 480, height = 400, pad = 30, legend = 130;
  double xlo = e.points.at(0, 0), xhi = xlo, ylo = e.points.at(0, 1), yhi = ylo;
  for (std::size_t i = 0; i < n; ++i) {
    xlo = std::min(xlo, e.points.at(i, 0)), xhi = std::max(xhi, e.points.at(i, 0));
    ylo = std::min(ylo, e.points.at(i, 1)), yhi = std::max(yhi, e.points.at(i, 1));
  }
  const double span = std::max({xhi - xlo, yhi - ylo, 1e-12});
  const double plot = std::min(width - legend, height) - 2 * pad;
  auto px = [&](double v) { return pad + (v - xlo) / span * plot; };
  auto py = [&](double v) { return height - pad - (v - ylo) / span * plot; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    s += "<circle class=\"point\" cx=\"" + num(px(e.points.at(i, 0))) + "\" cy=\"" + num(py(e.points.at(i, 1))) +
         "\" r=\"4\" fill=\"" + kPalette[labels[i] % std::size(kPalette)] + "\"/>\n";
  }
  for (std::size_t c = 0; c < vocabulary.size(); ++c) {
    const double y = pad + 18.0 * double(c);
    s += "<rect class=\"legend-swatch\" x=\"" + num(width - legend + 10) + "\" y=\"" + num(y - 9) +
         "\" width=\"10\" height=\"10\" fill=\"" + kPalette[c % std::size(kPalette)] + "\"/>\n";
    s += "<text class=\"legend-label\" x=\"" + num(width - legend + 26) + "\" y=\"" + num(y) + "\">" +
         escape(vocabulary[c]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_cam_csv(const CamOutput& cam, std::ostream& out) {
  out << "t,value\n";
  for (std::size_t t = 0; t < cam.cam.size(); ++t) out << t << ',' << detail::format_double(cam.cam[t]) << '\n';
}

void write_mds_csv(const MdsEmbedding& e, std::span<const std::size_t> labels,
                   const std::vector<std::string>& vocabulary, std::ostream& out) {
  if (labels.size() != e.points.dim(0)) throw ShapeError("one label per embedded point is required");
  out << "x,y,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << detail::format_double(e.points.at(i, 0)) << ',' << detail::format_double(e.points.at(i, 1)) << ','
        << (labels[i] < vocabulary.size() ? vocabulary[labels[i]] : std::to_string(labels[i])) << '\n';
  }
}

}  // namespace tsc::explain
