#pragma once

// Standalone SVG chart rendering for the plot command. Output is plain
// text with fixed-precision coordinates, so identical inputs give
// byte-identical documents.

#include <string>
#include <utility>
#include <vector>

namespace ttlab {

// One bar per label. Entries with a nonzero highlight flag use the accent
// color (used to mark true turn shifts under TRP bars).
std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values,
                          const std::vector<char>& highlight = {},
                          const std::string& y_label = "");

// One polyline per named series over a shared categorical x axis.
std::string svg_line_chart(
    const std::string& title, const std::vector<std::string>& x_labels,
    const std::vector<std::pair<std::string, std::vector<double>>>& series,
    const std::string& y_label = "");

// Five-number box (min, q1, median, q3, max) per group; groups with the
// same series name share a color.
struct BoxGroup {
  std::string label;
  std::string series;
  std::vector<double> samples;
};
std::string svg_box_chart(const std::string& title,
                          const std::vector<BoxGroup>& groups,
                          const std::string& y_label = "");

}  // namespace ttlab
