#pragma once

#include <string>
#include <vector>

namespace ctxcert::svg {

struct Series {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

std::string escape_xml(const std::string &text);

// Standalone SVG, viewBox "0 0 640 480", both axes spanning [0, 1], one polyline per series and a
// legend row per series. Output depends only on the chart contents.
std::string render_line_chart(const LineChart &chart);

} // namespace ctxcert::svg
