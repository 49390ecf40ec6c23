#include "iuq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "iuq/errors.hpp"

namespace iuq::svg {

namespace {

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

std::string tick_label(double v, double step) {
  const int digits = std::max(0, -static_cast<int>(std::floor(std::log10(step))));
  return fmt::format("{:.{}f}", v, digits);
}

}  // namespace

std::vector<double> ticks(double lo, double hi, int target_count) {
  if (!(hi > lo) || target_count < 1) return {lo};
  const double raw = (hi - lo) / target_count;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

Chart::Chart(std::string title, std::string x_label, std::string y_label, int width, int height)
    : title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)),
      width_(width),
      height_(height) {}

void Chart::add(Series series) {
  if (series.x.size() != series.y.size()) throw ArgumentError("svg::Series: x and y differ in length");
  series_.push_back(std::move(series));
}

void Chart::add(Band band) {
  if (band.x.size() != band.lower.size() || band.x.size() != band.upper.size()) {
    throw ArgumentError("svg::Band: x, lower and upper differ in length");
  }
  bands_.push_back(std::move(band));
}

std::string Chart::render() const {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
      x0 = std::min(x0, xs[i]);
      x1 = std::max(x1, xs[i]);
      y0 = std::min(y0, ys[i]);
      y1 = std::max(y1, ys[i]);
    }
  };
  for (const auto& s : series_) extend(s.x, s.y);
  for (const auto& b : bands_) {
    extend(b.x, b.lower);
    extend(b.x, b.upper);
  }
  if (!std::isfinite(x0)) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 70, right = 20, top = 40, bottom = 50;
  const double pw = width_ - left - right, ph = height_ - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width_, height_, width_, height_);
  s += fmt::format("<text x=\"{:.1f}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                   width_ / 2.0, escape(title_));

  for (const auto& b : bands_) {
    std::string pts;
    for (std::size_t i = 0; i < b.x.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", px(b.x[i]), py(b.upper[i]));
    for (std::size_t i = b.x.size(); i-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", px(b.x[i]), py(b.lower[i]));
    s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n", pts,
                     b.color, b.opacity);
  }
  for (const auto& ser : series_) {
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (std::isfinite(ser.y[i])) pts += fmt::format("{:.2f},{:.2f} ", px(ser.x[i]), py(ser.y[i]));
    }
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n", pts,
                     ser.color, ser.width);
  }

  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   left, top, pw, ph);
  const auto xt = ticks(x0, x1);
  const double xstep = xt.size() > 1 ? xt[1] - xt[0] : 1.0;
  for (double t : xt) {
    s += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\" font-size=\"11\">{4}</text>\n",
        px(t), top + ph, top + ph + 5, top + ph + 18, tick_label(t, xstep));
  }
  const auto yt = ticks(y0, y1);
  const double ystep = yt.size() > 1 ? yt[1] - yt[0] : 1.0;
  for (double t : yt) {
    s += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\" font-size=\"11\">{5}</text>\n",
        left - 5, py(t), left, left - 8, py(t) + 4, tick_label(t, ystep));
  }
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
                   left + pw / 2, height_ - 10.0, escape(x_label_));
  s += fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" font-size=\"12\" "
      "transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
      top + ph / 2, escape(y_label_));

  double ly = top + 14;
  auto legend = [&](const std::string& label, const std::string& color) {
    if (label.empty()) return;
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"4\" fill=\"{}\"/>"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n",
        left + pw - 150, ly - 4, color, left + pw - 134, ly, escape(label));
    ly += 15;
  };
  for (const auto& b : bands_) legend(b.label, b.color);
  for (const auto& ser : series_) legend(ser.label, ser.color);
  s += "</svg>\n";
  return s;
}

}  // namespace iuq::svg
