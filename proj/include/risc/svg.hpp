#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace risc::svg {

inline std::string fixed(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

/// Five-stop approximation of viridis; t is clamped to [0, 1].
inline std::string colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> kStops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * (kStops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kStops.size() - 2);
  const double f = pos - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(kStops[i][0] + f * (kStops[i + 1][0] - kStops[i][0]))),
                static_cast<int>(std::lround(kStops[i][1] + f * (kStops[i + 1][1] - kStops[i][1]))),
                static_cast<int>(std::lround(kStops[i][2] + f * (kStops[i + 1][2] - kStops[i][2]))));
  return buf;
}

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#17becf"};

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    body_ << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(w) << "\" height=\""
          << fixed(h) << "\" fill=\"" << fill << "\"" << (extra.empty() ? "" : " " + extra) << "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
    body_ << "<line x1=\"" << fixed(x1) << "\" y1=\"" << fixed(y1) << "\" x2=\"" << fixed(x2) << "\" y2=\""
          << fixed(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fixed(width) << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size = 12, const std::string& anchor = "start",
            const std::string& fill = "#000") {
    body_ << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" font-family=\"sans-serif\" font-size=\""
          << fixed(size, 1) << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\">" << escape(s)
          << "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fixed(width) << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << fixed(x) << ',' << fixed(y) << ' ';
    body_ << "\"/>\n";
  }

  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill, double opacity) {
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << fixed(opacity) << "\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : pts) body_ << fixed(x) << ',' << fixed(y) << ' ';
    body_ << "\"/>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width_, 0) << "\" height=\""
        << fixed(height_, 0) << "\" viewBox=\"0 0 " << fixed(width_, 0) << ' ' << fixed(height_, 0) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

/// Maps data coordinates into a plotting rectangle with axes, ticks and labels.
class Axes {
 public:
  Axes(Document& doc, double x0, double y0, double w, double h, std::pair<double, double> xrange,
       std::pair<double, double> yrange)
      : doc_(doc), x0_(x0), y0_(y0), w_(w), h_(h), xr_(xrange), yr_(yrange) {
    if (xr_.second <= xr_.first) xr_.second = xr_.first + 1.0;
    if (yr_.second <= yr_.first) yr_.second = yr_.first + 1.0;
  }

  double px(double x) const { return x0_ + (x - xr_.first) / (xr_.second - xr_.first) * w_; }
  double py(double y) const { return y0_ + h_ - (y - yr_.first) / (yr_.second - yr_.first) * h_; }

  // Categorical plots pass x_ticks = false and label their own columns.
  void frame(const std::string& title, const std::string& xlabel, const std::string& ylabel, int ticks = 5,
             bool x_ticks = true) {
    doc_.rect(x0_, y0_, w_, h_, "none", "stroke=\"#000\"");
    for (int i = 0; i <= ticks; ++i) {
      const double fx = xr_.first + (xr_.second - xr_.first) * i / ticks;
      const double fy = yr_.first + (yr_.second - yr_.first) * i / ticks;
      if (x_ticks) {
        doc_.line(px(fx), y0_ + h_, px(fx), y0_ + h_ + 4, "#000");
        doc_.text(px(fx), y0_ + h_ + 16, tick_label(fx), 10, "middle");
      }
      doc_.line(x0_, py(fy), x0_ + w_, py(fy), "#e0e0e0");
      doc_.text(x0_ - 6, py(fy) + 3, tick_label(fy), 10, "end");
    }
    doc_.text(x0_ + w_ / 2, y0_ - 10, title, 14, "middle");
    doc_.text(x0_ + w_ / 2, y0_ + h_ + 34, xlabel, 12, "middle");
    doc_.text(x0_ - 44, y0_ + h_ / 2, ylabel, 12, "middle");
  }

 private:
  static std::string tick_label(double v) {
    if (std::abs(v) >= 1000) return fixed(v / 1000.0, 0) + "k";
    return fixed(v, std::abs(v - std::round(v)) < 1e-9 ? 0 : 2);
  }

  Document& doc_;
  double x0_, y0_, w_, h_;
  std::pair<double, double> xr_, yr_;
};

}  // namespace risc::svg
