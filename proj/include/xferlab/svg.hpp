#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"

namespace xferlab {

// Minimal SVG renderer for the report figures. Everything is a pure function
// of its inputs with fixed iteration order and one number formatter, so the
// same data always produces the same bytes. No external plotting dependency.

inline const std::vector<std::string>& svg_palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                               "#9467bd"};
    return p;
}

namespace svgdetail {

/// Pixel coordinate: two decimals, no negative zero.
inline std::string px(double v) {
    double r = std::round(v * 100.0) / 100.0;
    if (r == 0.0) r = 0.0;  // collapse -0
    return format_double(r);
}

/// Tick label: enough decimals for the step size, trailing zeros stripped.
inline std::string tick_label(double v, double step) {
    int decimals = 0;
    if (step < 1.0) decimals = int(std::ceil(-std::log10(step))) + 1;
    decimals = std::min(decimals, 9);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

struct Ticks {
    double lo = 0.0, hi = 1.0, step = 1.0;
    std::vector<double> values;
};

/// 1-2-5 tick spacing covering [lo, hi]; degenerate ranges get a unit pad.
inline Ticks nice_ticks(double lo, double hi, std::size_t target = 6) {
    if (!(hi > lo)) {
        double pad = std::max(1.0, std::abs(lo)) * 0.5;
        lo -= pad;
        hi += pad;
    }
    double raw = (hi - lo) / double(target);
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double norm = raw / mag;
    double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
    Ticks t;
    t.lo = lo;
    t.hi = hi;
    t.step = step;
    double first = std::ceil(lo / step - 1e-9);
    for (double k = first; k * step <= hi + 1e-9 * step; k += 1.0) t.values.push_back(k * step);
    return t;
}

inline std::string escape_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

inline void text_at(std::string& svg, double x, double y, const std::string& s, int size = 11,
                    const std::string& anchor = "start", const std::string& fill = "#222222") {
    svg += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"monospace\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\">" +
           escape_text(s) + "</text>\n";
}

inline void line_at(std::string& svg, double x1, double y1, double x2, double y2,
                    const std::string& stroke, const std::string& width = "1") {
    svg += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" +
           px(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + width + "\"/>\n";
}

inline void rect_at(std::string& svg, double x, double y, double w, double h,
                    const std::string& fill, const std::string& extra = "") {
    svg += "<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(w) + "\" height=\"" +
           px(h) + "\" fill=\"" + fill + "\"" + extra + "/>\n";
}

inline std::string svg_open(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + px(w) + " " + px(h) +
           "\" width=\"" + px(w) + "\" height=\"" + px(h) + "\">\n";
}

/// Linear interpolation between two #rrggbb colors, t clamped to [0,1].
inline std::string lerp_color(const std::string& a, const std::string& b, double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto chan = [&](int i) {
        int ca = std::stoi(a.substr(std::size_t(1 + 2 * i), 2), nullptr, 16);
        int cb = std::stoi(b.substr(std::size_t(1 + 2 * i), 2), nullptr, 16);
        return int(std::lround(ca + t * (cb - ca)));
    };
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", chan(0), chan(1), chan(2));
    return std::string(buf);
}

}  // namespace svgdetail

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> half_band;  // +/- band half-width per point; empty = no band
    std::string annotation;         // optional extra legend text, e.g. a similarity score
};

struct SvgChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    double width = 640.0;
    double height = 400.0;
};

/// Multi-series line chart with optional shaded bands and a legend.
inline std::string svg_line_chart(const SvgChartOptions& opt, const std::vector<SvgSeries>& series) {
    using namespace svgdetail;
    require(!series.empty(), ErrorCode::Precondition, "line chart needs at least one series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        require(s.x.size() == s.y.size() && !s.x.empty(), ErrorCode::ShapeMismatch,
                "series x/y must be non-empty and equal length");
        require(s.half_band.empty() || s.half_band.size() == s.x.size(), ErrorCode::ShapeMismatch,
                "band size must match series length");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            require(std::isfinite(s.x[i]) && std::isfinite(s.y[i]), ErrorCode::NumericNan,
                    "non-finite chart data");
            double b = s.half_band.empty() ? 0.0 : s.half_band[i];
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - b);
            ymax = std::max(ymax, s.y[i] + b);
        }
    }
    double ypad = (ymax - ymin) * 0.06;
    if (ypad == 0.0) ypad = std::max(1.0, std::abs(ymin)) * 0.1;
    Ticks tx = nice_ticks(xmin, xmax);
    Ticks ty = nice_ticks(ymin - ypad, ymax + ypad);

    const double ml = 62.0, mr = 16.0, mt = 30.0, mb = 44.0;
    double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto X = [&](double v) { return ml + (v - tx.lo) / (tx.hi - tx.lo) * pw; };
    auto Y = [&](double v) { return mt + ph - (v - ty.lo) / (ty.hi - ty.lo) * ph; };

    std::string svg = svg_open(opt.width, opt.height);
    rect_at(svg, 0, 0, opt.width, opt.height, "#ffffff");
    for (double t : tx.values) line_at(svg, X(t), mt, X(t), mt + ph, "#e6e6e6");
    for (double t : ty.values) line_at(svg, ml, Y(t), ml + pw, Y(t), "#e6e6e6");
    rect_at(svg, ml, mt, pw, ph, "none", " stroke=\"#444444\" stroke-width=\"1\"");
    for (double t : tx.values)
        text_at(svg, X(t), mt + ph + 16, tick_label(t, tx.step), 10, "middle");
    for (double t : ty.values)
        text_at(svg, ml - 6, Y(t) + 3.5, tick_label(t, ty.step), 10, "end");
    text_at(svg, ml + pw / 2, opt.height - 10, opt.x_label, 11, "middle");
    // y-axis label rendered vertically
    svg += "<text x=\"" + px(14.0) + "\" y=\"" + px(mt + ph / 2) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\" fill=\"#222222\""
           " transform=\"rotate(-90 " +
           px(14.0) + " " + px(mt + ph / 2) + ")\">" + escape_text(opt.y_label) + "</text>\n";
    text_at(svg, ml + pw / 2, 18, opt.title, 13, "middle");

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const std::string& color = svg_palette()[k % svg_palette().size()];
        if (!s.half_band.empty()) {
            std::string d = "M";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (i) d += " L";
                d += px(X(s.x[i])) + "," + px(Y(s.y[i] + s.half_band[i]));
            }
            for (std::size_t i = s.x.size(); i-- > 0;)
                d += " L" + px(X(s.x[i])) + "," + px(Y(s.y[i] - s.half_band[i]));
            d += " Z";
            svg += "<path d=\"" + d + "\" fill=\"" + color + "\" fill-opacity=\"0.18\" "
                   "stroke=\"none\"/>\n";
        }
        std::string d = "M";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) d += " L";
            d += px(X(s.x[i])) + "," + px(Y(s.y[i]));
        }
        svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.6\"/>\n";
    }
    // legend, top-right inside the plot
    double lx = ml + pw - 8, ly = mt + 14;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const std::string& color = svg_palette()[k % svg_palette().size()];
        std::string label = series[k].label;
        if (!series[k].annotation.empty()) label += "  (" + series[k].annotation + ")";
        line_at(svg, lx - 150, ly - 4, lx - 132, ly - 4, color, "2");
        text_at(svg, lx - 126, ly, label, 10);
        ly += 15;
    }
    svg += "</svg>\n";
    return svg;
}

struct SvgBarGroup {
    std::string label;            // tick label under the group
    std::vector<double> values;   // one bar per series
};

/// Grouped bar chart (e.g. dynamics/reward dissimilarity per target task).
inline std::string svg_bar_chart(const SvgChartOptions& opt,
                                 const std::vector<std::string>& series_names,
                                 const std::vector<SvgBarGroup>& groups) {
    using namespace svgdetail;
    require(!series_names.empty() && !groups.empty(), ErrorCode::Precondition,
            "bar chart needs series and groups");
    double vmax = 0.0;
    for (const auto& g : groups) {
        require(g.values.size() == series_names.size(), ErrorCode::ShapeMismatch,
                "each group needs one value per series");
        for (double v : g.values) {
            require(std::isfinite(v) && v >= 0.0, ErrorCode::Precondition,
                    "bar values must be finite and non-negative");
            vmax = std::max(vmax, v);
        }
    }
    if (vmax == 0.0) vmax = 1.0;
    Ticks ty = nice_ticks(0.0, vmax * 1.1);

    const double ml = 62.0, mr = 16.0, mt = 30.0, mb = 44.0;
    double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto Y = [&](double v) { return mt + ph - (v - ty.lo) / (ty.hi - ty.lo) * ph; };

    std::string svg = svg_open(opt.width, opt.height);
    rect_at(svg, 0, 0, opt.width, opt.height, "#ffffff");
    for (double t : ty.values) line_at(svg, ml, Y(t), ml + pw, Y(t), "#e6e6e6");
    rect_at(svg, ml, mt, pw, ph, "none", " stroke=\"#444444\" stroke-width=\"1\"");
    for (double t : ty.values)
        text_at(svg, ml - 6, Y(t) + 3.5, tick_label(t, ty.step), 10, "end");
    text_at(svg, ml + pw / 2, 18, opt.title, 13, "middle");
    text_at(svg, ml + pw / 2, opt.height - 10, opt.x_label, 11, "middle");
    svg += "<text x=\"" + px(14.0) + "\" y=\"" + px(mt + ph / 2) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\" fill=\"#222222\""
           " transform=\"rotate(-90 " +
           px(14.0) + " " + px(mt + ph / 2) + ")\">" + escape_text(opt.y_label) + "</text>\n";

    double group_w = pw / double(groups.size());
    double bar_w = group_w * 0.7 / double(series_names.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double gx = ml + group_w * (double(g) + 0.15);
        for (std::size_t k = 0; k < series_names.size(); ++k) {
            const std::string& color = svg_palette()[k % svg_palette().size()];
            double v = groups[g].values[k];
            rect_at(svg, gx + bar_w * double(k), Y(v), bar_w * 0.9, Y(0.0) - Y(v), color);
            text_at(svg, gx + bar_w * (double(k) + 0.45), Y(v) - 3, format_double(std::round(v * 1e4) / 1e4),
                    8, "middle");
        }
        text_at(svg, ml + group_w * (double(g) + 0.5), mt + ph + 16, groups[g].label, 10, "middle");
    }
    double lx = ml + pw - 8, ly = mt + 14;
    for (std::size_t k = 0; k < series_names.size(); ++k) {
        const std::string& color = svg_palette()[k % svg_palette().size()];
        rect_at(svg, lx - 150, ly - 10, 12, 8, color);
        text_at(svg, lx - 132, ly - 2, series_names[k], 10);
        ly += 15;
    }
    svg += "</svg>\n";
    return svg;
}

/// Gridworld heatmap: one rect per cell. NaN cells (walls) render dark;
/// letters from the glyph rows (S, G, D) are drawn on top. A small colorbar
/// maps the value range.
inline std::string svg_heatmap(const std::string& title, const std::vector<std::string>& glyphs,
                               const std::vector<std::vector<double>>& values, double lo, double hi,
                               const std::string& legend_label) {
    using namespace svgdetail;
    require(!values.empty() && !values[0].empty(), ErrorCode::Precondition, "empty heatmap");
    require(glyphs.size() == values.size(), ErrorCode::ShapeMismatch,
            "glyph rows must match value rows");
    require(hi > lo, ErrorCode::Precondition, "heatmap range must be non-degenerate");
    std::size_t rows = values.size(), cols = values[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        require(values[r].size() == cols && glyphs[r].size() == cols, ErrorCode::ShapeMismatch,
                "ragged heatmap row");
    }

    const double cell = 26.0, ml = 20.0, mt = 34.0, legend_w = 86.0, mb = 14.0;
    double w = ml + cell * double(cols) + legend_w;
    double h = mt + cell * double(rows) + mb;
    const std::string c_lo = "#f7fbff", c_hi = "#08306b", c_wall = "#3b3b3b";

    std::string svg = svg_open(w, h);
    rect_at(svg, 0, 0, w, h, "#ffffff");
    text_at(svg, ml, 20, title, 13);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double x = ml + cell * double(c), y = mt + cell * double(r);
            double v = values[r][c];
            std::string fill =
                std::isnan(v) ? c_wall : lerp_color(c_lo, c_hi, (v - lo) / (hi - lo));
            rect_at(svg, x, y, cell, cell, fill, " stroke=\"#cccccc\" stroke-width=\"0.5\"");
            char g = glyphs[r][c];
            if (g == 'S' || g == 'G')
                text_at(svg, x + cell / 2, y + cell / 2 + 4, std::string(1, g), 12, "middle",
                        g == 'G' ? "#d62728" : "#ff7f0e");
        }
    }
    // colorbar: 8 swatches from lo to hi
    double bx = ml + cell * double(cols) + 18, by = mt, bw = 16, bh = cell * double(rows) / 8.0;
    for (int k = 0; k < 8; ++k) {
        double t = (7.0 - double(k)) / 7.0;
        rect_at(svg, bx, by + bh * k, bw, bh, lerp_color(c_lo, c_hi, t));
    }
    text_at(svg, bx + bw + 4, by + 8, format_double(std::round(hi * 100.0) / 100.0), 9);
    text_at(svg, bx + bw + 4, by + bh * 8, format_double(std::round(lo * 100.0) / 100.0), 9);
    text_at(svg, bx, by + bh * 8 + 14, legend_label, 9);
    svg += "</svg>\n";
    return svg;
}

}  // namespace xferlab
