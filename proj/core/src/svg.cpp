#include "ctxcert/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace ctxcert::svg {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

constexpr std::array<const char *, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

double px(double x) { return kLeft + std::clamp(x, 0.0, 1.0) * kPlotW; }
double py(double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * kPlotH; }

} // namespace

std::string escape_xml(const std::string &text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::string render_line_chart(const LineChart &chart)
{
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 480\" width=\"640\" height=\"480\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n"
        << "<text x=\"" << num(kLeft + kPlotW / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\">" << escape_xml(chart.title) << "</text>\n";

    // Grid and tick labels every 0.1.
    out << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (int i = 0; i <= 10; ++i) {
        const double t = i / 10.0;
        out << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(t)) << "\" y2=\""
            << num(py(1)) << "\"/>\n";
        out << "<line x1=\"" << num(px(0)) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(px(1)) << "\" y2=\""
            << num(py(t)) << "\"/>\n";
    }
    out << "</g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (int i = 0; i <= 10; i += 2) {
        const double t = i / 10.0;
        out << "<text x=\"" << num(px(t)) << "\" y=\"" << num(py(0) + 16) << "\" text-anchor=\"middle\">"
            << num(t).substr(0, 3) << "</text>\n";
        out << "<text x=\"" << num(px(0) - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
            << num(t).substr(0, 3) << "</text>\n";
    }
    out << "</g>\n";
    out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kPlotW) << "\" height=\""
        << num(kPlotH) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(kLeft + kPlotW / 2) << "\" y=\"" << num(kHeight - 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape_xml(chart.x_label)
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << num(kTop + kPlotH / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" transform=\"rotate(-90 18 " << num(kTop + kPlotH / 2) << ")\">"
        << escape_xml(chart.y_label) << "</text>\n";

    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const Series &series = chart.series[s];
        const char *colour = kPalette[s % kPalette.size()];
        out << "<polyline class=\"series\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        const std::size_t n = std::min(series.xs.size(), series.ys.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0)
                out << ' ';
            out << num(px(series.xs[i])) << ',' << num(py(series.ys[i]));
        }
        out << "\"/>\n";
    }

    out << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const double y = kTop + 10 + 20.0 * static_cast<double>(s);
        const double x = kLeft + kPlotW + 15;
        out << "<g class=\"legend-row\"><line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 24)
            << "\" y2=\"" << num(y) << "\" stroke=\"" << kPalette[s % kPalette.size()]
            << "\" stroke-width=\"2\"/><text x=\"" << num(x + 30) << "\" y=\"" << num(y + 4) << "\">"
            << escape_xml(chart.series[s].name) << "</text></g>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

} // namespace ctxcert::svg
