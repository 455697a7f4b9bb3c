#include "scflow/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "scflow/textio.hpp"

namespace scflow::svg {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const std::array<const char*, 12> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};

struct Frame {
  double x0, x1, y0, y1;

  [[nodiscard]] double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  [[nodiscard]] double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  return {x0, x1, y0 - pad, y1 + pad};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) { return textio::format_number(std::round(v * 100.0) / 100.0); }

void axes(std::ostringstream& s, const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
    << kHeight - kBottom << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
      << textio::format_number(std::round(xv * 1000) / 1000) << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
      << textio::format_number(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n"
    << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kHeight / 2
    << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& sr : series) {
    for (double v : sr.x) { x0 = std::min(x0, v); x1 = std::max(x1, v); }
    for (double v : sr.y) {
      if (!std::isfinite(v)) continue;
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!std::isfinite(x0)) { x0 = 0; x1 = 1; }
  if (!std::isfinite(y0)) { y0 = 0; y1 = 1; }
  const Frame f = make_frame(x0, x1, y0, y1);
  std::ostringstream s;
  axes(s, f, title, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = kPalette[k % kPalette.size()];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (std::isfinite(sr.y[i])) s << num(f.px(sr.x[i])) << ',' << num(f.py(sr.y[i])) << ' ';
    }
    s << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    s << "<rect x=\"" << kWidth - 150 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>"
      << "<text x=\"" << kWidth - 135 << "\" y=\"" << ly + 1 << "\">" << escape(sr.name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string scatter_plot(const std::string& title, const Eigen::MatrixXd& xy, const std::vector<int>& groups) {
  const Frame f = xy.rows() > 0 ? make_frame(xy.col(0).minCoeff(), xy.col(0).maxCoeff(), xy.col(1).minCoeff(),
                                             xy.col(1).maxCoeff())
                                : make_frame(0, 1, 0, 1);
  std::ostringstream s;
  axes(s, f, title, "PC1", "PC2");
  for (Eigen::Index i = 0; i < xy.rows(); ++i) {
    const int g = i < static_cast<Eigen::Index>(groups.size()) ? groups[i] : 0;
    s << "<circle cx=\"" << num(f.px(xy(i, 0))) << "\" cy=\"" << num(f.py(xy(i, 1))) << "\" r=\"2\" fill=\""
      << kPalette[static_cast<std::size_t>(std::abs(g)) % kPalette.size()] << "\" fill-opacity=\"0.7\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace scflow::svg
