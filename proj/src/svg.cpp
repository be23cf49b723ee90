#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "error.hpp"

namespace ttlab {

namespace {

constexpr double kW = 720, kH = 420;
constexpr double kLeft = 64, kRight = 20, kTop = 44, kBottom = 72;
const char* kPalette[] = {"#2c7fb8", "#d95f02", "#1b9e77", "#756bb1",
                         "#636363"};
constexpr int kPaletteSize = 5;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Scale {
  double lo, hi;
  double y(double v) const {
    return kH - kBottom - (v - lo) / (hi - lo) * (kH - kTop - kBottom);
  }
};

Scale fit_scale(double lo, double hi, bool from_zero) {
  if (from_zero) lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  double pad = (hi - lo) * 0.05;
  return {lo == 0.0 ? 0.0 : lo - pad, hi + pad};
}

void open_doc(std::string& s, const std::string& title) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) +
       "\" height=\"" + num(kH) + "\" viewBox=\"0 0 " + num(kW) + " " +
       num(kH) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" " +
       "font-family=\"sans-serif\" font-size=\"15\">" + xml_escape(title) +
       "</text>\n";
}

void axes(std::string& s, const Scale& sc, const std::string& y_label) {
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" +
       num(kLeft) + "\" y2=\"" + num(kH - kBottom) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kH - kBottom) +
       "\" x2=\"" + num(kW - kRight) + "\" y2=\"" + num(kH - kBottom) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double v = sc.lo + (sc.hi - sc.lo) * i / 4.0;
    double y = sc.y(v);
    s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(y) + "\" x2=\"" +
         num(kLeft) + "\" y2=\"" + num(y) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" " +
         "font-size=\"11\">" + tick_label(v) + "</text>\n";
  }
  if (!y_label.empty())
    s += "<text x=\"16\" y=\"" + num((kTop + kH - kBottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 " +
         num((kTop + kH - kBottom) / 2) + ")\">" + xml_escape(y_label) +
         "</text>\n";
}

void x_tick(std::string& s, double x, const std::string& label) {
  s += "<text x=\"" + num(x) + "\" y=\"" + num(kH - kBottom + 16) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"10\">" +
       xml_escape(label) + "</text>\n";
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

}  // namespace

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values,
                          const std::vector<char>& highlight,
                          const std::string& y_label) {
  if (values.empty() || labels.size() != values.size())
    throw InvalidArgument("bar chart: no data or label mismatch");
  double hi = *std::max_element(values.begin(), values.end());
  double lo = *std::min_element(values.begin(), values.end());
  Scale sc = fit_scale(std::min(lo, 0.0), std::max(hi, 0.0), true);
  std::string s;
  open_doc(s, title);
  axes(s, sc, y_label);
  double span = kW - kLeft - kRight;
  double step = span / static_cast<double>(values.size());
  double bw = step * 0.7;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double x = kLeft + step * (static_cast<double>(i) + 0.15);
    double y0 = sc.y(0.0), y1 = sc.y(values[i]);
    const char* color =
        (i < highlight.size() && highlight[i]) ? kPalette[1] : kPalette[0];
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(std::min(y0, y1)) +
         "\" width=\"" + num(bw) + "\" height=\"" + num(std::abs(y0 - y1)) +
         "\" fill=\"" + color + "\"/>\n";
    // Rotate long tick labels so token text stays readable.
    double cx = x + bw / 2;
    s += "<text x=\"" + num(cx) + "\" y=\"" + num(kH - kBottom + 14) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\""
         " transform=\"rotate(-45 " + num(cx) + " " +
         num(kH - kBottom + 14) + ")\">" + xml_escape(labels[i]) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string svg_line_chart(
    const std::string& title, const std::vector<std::string>& x_labels,
    const std::vector<std::pair<std::string, std::vector<double>>>& series,
    const std::string& y_label) {
  if (series.empty() || x_labels.empty())
    throw InvalidArgument("line chart: no data");
  double lo = series[0].second.at(0), hi = lo;
  for (const auto& [name, ys] : series) {
    if (ys.size() != x_labels.size())
      throw InvalidArgument("line chart: series " + name +
                            " length mismatch");
    for (double v : ys) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  Scale sc = fit_scale(lo, hi, false);
  std::string s;
  open_doc(s, title);
  axes(s, sc, y_label);
  double span = kW - kLeft - kRight;
  double step = span / static_cast<double>(x_labels.size());
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    x_tick(s, kLeft + step * (static_cast<double>(i) + 0.5), x_labels[i]);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % kPaletteSize];
    std::string pts;
    for (std::size_t i = 0; i < series[k].second.size(); ++i) {
      double x = kLeft + step * (static_cast<double>(i) + 0.5);
      double y = sc.y(series[k].second[i]);
      pts += num(x) + "," + num(y) + " ";
      s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) +
           "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(kW - kRight - 4) + "\" y=\"" +
         num(kTop + 16 * static_cast<double>(k + 1)) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"" +
         color + "\">" + xml_escape(series[k].first) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string svg_box_chart(const std::string& title,
                          const std::vector<BoxGroup>& groups,
                          const std::string& y_label) {
  if (groups.empty()) throw InvalidArgument("box chart: no data");
  double lo = 0, hi = 0;
  bool first = true;
  std::map<std::string, int> series_color;
  for (const BoxGroup& g : groups) {
    if (g.samples.empty())
      throw InvalidArgument("box chart: empty group " + g.label);
    for (double v : g.samples) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
    if (!series_color.count(g.series)) {
      int next = static_cast<int>(series_color.size());
      series_color[g.series] = next;
    }
  }
  Scale sc = fit_scale(lo, hi, false);
  std::string s;
  open_doc(s, title);
  axes(s, sc, y_label);
  double span = kW - kLeft - kRight;
  double step = span / static_cast<double>(groups.size());
  double bw = step * 0.5;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    std::vector<double> v = groups[i].samples;
    std::sort(v.begin(), v.end());
    double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5),
           q3 = quantile(v, 0.75);
    double cx = kLeft + step * (static_cast<double>(i) + 0.5);
    double x0 = cx - bw / 2, x1 = cx + bw / 2;
    const char* color =
        kPalette[series_color[groups[i].series] % kPaletteSize];
    // whiskers to min/max
    s += "<line x1=\"" + num(cx) + "\" y1=\"" + num(sc.y(v.front())) +
         "\" x2=\"" + num(cx) + "\" y2=\"" + num(sc.y(q1)) + "\" stroke=\"" +
         color + "\"/>\n";
    s += "<line x1=\"" + num(cx) + "\" y1=\"" + num(sc.y(q3)) + "\" x2=\"" +
         num(cx) + "\" y2=\"" + num(sc.y(v.back())) + "\" stroke=\"" + color +
         "\"/>\n";
    for (double w : {v.front(), v.back()})
      s += "<line x1=\"" + num(cx - bw / 4) + "\" y1=\"" + num(sc.y(w)) +
           "\" x2=\"" + num(cx + bw / 4) + "\" y2=\"" + num(sc.y(w)) +
           "\" stroke=\"" + color + "\"/>\n";
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(sc.y(q3)) + "\" width=\"" +
         num(x1 - x0) + "\" height=\"" + num(sc.y(q1) - sc.y(q3)) +
         "\" fill=\"" + color + "\" fill-opacity=\"0.35\" stroke=\"" + color +
         "\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(sc.y(q2)) + "\" x2=\"" +
         num(x1) + "\" y2=\"" + num(sc.y(q2)) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    x_tick(s, cx, groups[i].label);
  }
  int li = 0;
  for (const auto& [name, idx] : series_color) {
    s += "<text x=\"" + num(kW - kRight - 4) + "\" y=\"" +
         num(kTop + 16 * static_cast<double>(li + 1)) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"" +
         std::string(kPalette[idx % kPaletteSize]) + "\">" +
         xml_escape(name) + "</text>\n";
    ++li;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace ttlab
