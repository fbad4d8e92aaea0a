#pragma once

#include "phtest/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace phtest::svg {

struct Series {
    std::vector<std::array<double, 2>> points;
    bool line = true;  // polyline when true, dot markers otherwise
    std::string color = "#1f77b4";
};

struct Panel {
    std::string title;
    std::vector<Series> series;
    bool diagonal = false;  // draw the x = y reference line
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors{
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
        "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"};
    return colors;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct Bounds {
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
};

inline Bounds panel_bounds(const Panel& panel) {
    Bounds b;
    bool any = false;
    for (const auto& s : panel.series) {
        for (const auto& p : s.points) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
            if (!any) {
                b = {p[0], p[0], p[1], p[1]};
                any = true;
            } else {
                b.xmin = std::min(b.xmin, p[0]);
                b.xmax = std::max(b.xmax, p[0]);
                b.ymin = std::min(b.ymin, p[1]);
                b.ymax = std::max(b.ymax, p[1]);
            }
        }
    }
    if (!any) return {0, 1, 0, 1};
    if (panel.diagonal) {
        b.xmin = b.ymin = std::min(b.xmin, b.ymin);
        b.xmax = b.ymax = std::max(b.xmax, b.ymax);
    }
    const double xpad = (b.xmax - b.xmin) * 0.05 + 1e-12;
    const double ypad = (b.ymax - b.ymin) * 0.05 + 1e-12;
    b.xmin -= xpad;
    b.xmax += xpad;
    b.ymin -= ypad;
    b.ymax += ypad;
    return b;
}

}  // namespace detail

/// Lays panels out in a fixed-column grid; each panel auto-scales to its own
/// data range.
inline std::string render_grid(const std::vector<Panel>& panels, std::size_t columns,
                               double panel_w = 280, double panel_h = 220) {
    columns = std::max<std::size_t>(1, columns);
    const std::size_t rows = panels.empty() ? 1 : (panels.size() + columns - 1) / columns;
    const double margin = 34, title_h = 18;
    const double cell_w = panel_w + margin, cell_h = panel_h + margin + title_h;
    const double width = cell_w * static_cast<double>(std::min(columns, std::max<std::size_t>(1, panels.size()))) + margin;
    const double height = cell_h * static_cast<double>(rows) + margin;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) +
           "\" height=\"" + detail::num(height) + "\" viewBox=\"0 0 " + detail::num(width) +
           " " + detail::num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t idx = 0; idx < panels.size(); ++idx) {
        const Panel& panel = panels[idx];
        const double ox = margin + static_cast<double>(idx % columns) * cell_w;
        const double oy = margin + static_cast<double>(idx / columns) * cell_h + title_h;
        const auto b = detail::panel_bounds(panel);
        const auto sx = [&](double x) {
            return ox + (x - b.xmin) / (b.xmax - b.xmin) * panel_w;
        };
        const auto sy = [&](double y) {
            return oy + panel_h - (y - b.ymin) / (b.ymax - b.ymin) * panel_h;
        };

        out += "<text x=\"" + detail::num(ox) + "\" y=\"" + detail::num(oy - 6) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + panel.title + "</text>\n";
        out += "<rect x=\"" + detail::num(ox) + "\" y=\"" + detail::num(oy) + "\" width=\"" +
               detail::num(panel_w) + "\" height=\"" + detail::num(panel_h) +
               "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        if (panel.diagonal)
            out += "<line x1=\"" + detail::num(sx(b.xmin)) + "\" y1=\"" + detail::num(sy(b.xmin)) +
                   "\" x2=\"" + detail::num(sx(b.xmax)) + "\" y2=\"" + detail::num(sy(b.xmax)) +
                   "\" stroke=\"#bbb\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";

        for (const auto& s : panel.series) {
            if (s.points.empty()) continue;
            if (s.line) {
                out += "<polyline fill=\"none\" stroke=\"" + s.color +
                       "\" stroke-width=\"1\" points=\"";
                for (const auto& p : s.points)
                    out += detail::num(sx(p[0])) + "," + detail::num(sy(p[1])) + " ";
                out += "\"/>\n";
            } else {
                for (const auto& p : s.points)
                    out += "<circle cx=\"" + detail::num(sx(p[0])) + "\" cy=\"" +
                           detail::num(sy(p[1])) + "\" r=\"1.6\" fill=\"" + s.color + "\"/>\n";
            }
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace phtest::svg
