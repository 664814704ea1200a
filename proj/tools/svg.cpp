#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid::svg {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Range {
  double lo, hi;
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
}

void frame(std::ostringstream& out, const Range& y, bool with_ticks) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
      << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!with_ticks) return;
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v, y0, y1);
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
        << io::format_real(v) << "</text>\n";
  }
}

}  // namespace

void write_line_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ValidationError("svg", "series '" + s.name + "' has mismatched x and y");
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y)
      if (std::isfinite(v)) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (!std::isfinite(xlo) || !std::isfinite(ylo)) xlo = ylo = 0.0, xhi = yhi = 1.0;
  const Range xr = xhi > xlo ? Range{xlo, xhi} : Range{xlo - 1.0, xhi + 1.0};
  const Range yr = padded(ylo, yhi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  std::ostringstream out;
  header(out, title);
  frame(out, yr, true);
  for (int i = 0; i <= 4; ++i) {
    const double v = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    out << "<text x=\"" << num(xr.map(v, x0, x1)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
        << io::format_real(v) << "</text>\n";
  }
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      out << num(xr.map(series[s].x[i], x0, x1)) << ',' << num(yr.map(series[s].y[i], y0, y1)) << ' ';
    }
    out << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(s) + 8.0;
    out << "<line x1=\"" << num(x1 + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(x1 + 30) << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(x1 + 36) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  io::write_text(path, out.str());
}

void write_bar_chart(const std::filesystem::path& path, const std::string& title, const std::vector<std::string>& labels,
                     const std::vector<double>& values) {
  if (labels.size() != values.size() || labels.empty())
    throw ValidationError("svg", "bar chart needs one value per label");
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  const Range yr{0.0, hi > 0.0 ? hi * 1.1 : 1.0};
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (x1 - x0) / static_cast<double>(values.size());

  std::ostringstream out;
  header(out, title);
  frame(out, yr, true);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double top = yr.map(values[i], y0, y1);
    const double left = x0 + slot * (static_cast<double>(i) + 0.15);
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.7) << "\" height=\""
        << num(y0 - top) << "\" fill=\"" << kColors[i % std::size(kColors)] << "\"/>\n";
    out << "<text x=\"" << num(left + slot * 0.35) << "\" y=\"" << num(top - 4) << "\" text-anchor=\"middle\">"
        << io::format_real(values[i]) << "</text>\n";
    out << "<text x=\"" << num(left + slot * 0.35) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
        << escape(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
  io::write_text(path, out.str());
}

}  // namespace fcid::svg
