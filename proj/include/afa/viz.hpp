#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "afa/errors.hpp"

namespace afa::viz {

namespace detail {

inline std::string escape_html(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace detail

/// Write a self-contained HTML page shading each token by its attention
/// weight: background opacity is a_i / max(a), so the darkest token is the
/// model's strongest focus regardless of sequence length. Output bytes are a
/// pure function of the inputs.
inline void render_attention_html(const std::vector<std::string>& tokens,
                                  const std::vector<double>& attention,
                                  const std::string& prediction, const std::string& gold,
                                  const std::string& out_path) {
    if (tokens.size() != attention.size()) {
        throw ContractError("render_attention_html: " + std::to_string(tokens.size()) +
                            " tokens vs " + std::to_string(attention.size()) + " weights");
    }
    if (tokens.empty()) throw ContractError("render_attention_html: empty sequence");
    double sum = 0.0, max = 0.0;
    for (double a : attention) {
        if (a < 0.0) throw ContractError("render_attention_html: negative attention weight");
        sum += a;
        max = std::max(max, a);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ContractError("render_attention_html: weights sum to " + std::to_string(sum) +
                            ", expected 1");
    }

    std::string html;
    html += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
    html += "<title>attention</title>\n<style>\n";
    html += "body{font-family:sans-serif;margin:2em;}\n";
    html += ".tok{padding:2px 4px;margin:1px;border-radius:3px;display:inline-block;}\n";
    html += ".meta{margin-bottom:1em;color:#333;}\n";
    html += "</style>\n</head>\n<body>\n";
    html += "<div class=\"meta\">predicted: <b>" + detail::escape_html(prediction) +
            "</b> &middot; gold: <b>" + detail::escape_html(gold) + "</b></div>\n";
    html += "<div class=\"tokens\">\n";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double opacity = max > 0.0 ? attention[i] / max : 0.0;
        html += "<span class=\"tok\" style=\"background:rgba(178,24,43," +
                detail::fixed(opacity, 6) + ")\" title=\"a=" + detail::fixed(attention[i], 6) +
                "\">" + detail::escape_html(tokens[i]) + "</span>\n";
    }
    html += "</div>\n</body>\n</html>\n";

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("render_attention_html: cannot write " + out_path);
    out << html;
}

/// One named line for the curve plot; ci_half (when non-empty) draws a
/// shaded band of y +- ci_half.
struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> ci_half;
};

/// Minimal SVG line chart with axes, ticks and a legend.
inline void render_curve_svg(const std::vector<Series>& series, const std::string& out_path) {
    if (series.empty()) throw ContractError("render_curve_svg: no series");
    for (const Series& s : series) {
        if (s.x.empty() || s.x.size() != s.y.size()) {
            throw ContractError("render_curve_svg: series \"" + s.name +
                                "\" has mismatched or empty data");
        }
        if (!s.ci_half.empty() && s.ci_half.size() != s.x.size()) {
            throw ContractError("render_curve_svg: series \"" + s.name +
                                "\" has mismatched CI data");
        }
        for (std::size_t i = 1; i < s.x.size(); ++i) {
            if (!(s.x[i] > s.x[i - 1])) {
                throw ContractError("render_curve_svg: series \"" + s.name +
                                    "\" x values must be strictly increasing");
            }
        }
    }

    double xmin = series[0].x.front(), xmax = series[0].x.back();
    double ymin = series[0].y[0], ymax = series[0].y[0];
    for (const Series& s : series) {
        xmin = std::min(xmin, s.x.front());
        xmax = std::max(xmax, s.x.back());
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double half = s.ci_half.empty() ? 0.0 : s.ci_half[i];
            ymin = std::min(ymin, s.y[i] - half);
            ymax = std::max(ymax, s.y[i] + half);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double pad_y = 0.05 * (ymax - ymin);
    ymin -= pad_y;
    ymax += pad_y;

    const double width = 640.0, height = 420.0;
    const double ml = 64.0, mr = 24.0, mt = 24.0, mb = 48.0;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    static const char* kColors[] = {"#b2182b", "#2166ac", "#1b7837", "#756bb1", "#636363"};
    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";

    // axes
    svg += "<line x1=\"" + detail::fixed(ml, 2) + "\" y1=\"" + detail::fixed(height - mb, 2) +
           "\" x2=\"" + detail::fixed(width - mr, 2) + "\" y2=\"" +
           detail::fixed(height - mb, 2) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::fixed(ml, 2) + "\" y1=\"" + detail::fixed(mt, 2) +
           "\" x2=\"" + detail::fixed(ml, 2) + "\" y2=\"" + detail::fixed(height - mb, 2) +
           "\" stroke=\"black\"/>\n";
    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xmin + (xmax - xmin) * t / ticks;
        const double fy = ymin + (ymax - ymin) * t / ticks;
        svg += "<line x1=\"" + detail::fixed(sx(fx), 2) + "\" y1=\"" +
               detail::fixed(height - mb, 2) + "\" x2=\"" + detail::fixed(sx(fx), 2) +
               "\" y2=\"" + detail::fixed(height - mb + 5, 2) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::fixed(sx(fx), 2) + "\" y=\"" +
               detail::fixed(height - mb + 20, 2) +
               "\" font-size=\"11\" text-anchor=\"middle\">" + detail::fixed(fx, 2) + "</text>\n";
        svg += "<line x1=\"" + detail::fixed(ml - 5, 2) + "\" y1=\"" + detail::fixed(sy(fy), 2) +
               "\" x2=\"" + detail::fixed(ml, 2) + "\" y2=\"" + detail::fixed(sy(fy), 2) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::fixed(ml - 8, 2) + "\" y=\"" +
               detail::fixed(sy(fy) + 4, 2) + "\" font-size=\"11\" text-anchor=\"end\">" +
               detail::fixed(fy, 3) + "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kColors[si % 5];
        if (!s.ci_half.empty()) {
            std::string band = "<polygon fill=\"" + std::string(color) +
                               "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                band += detail::fixed(sx(s.x[i]), 2) + "," +
                        detail::fixed(sy(s.y[i] + s.ci_half[i]), 2) + " ";
            }
            for (std::size_t i = s.x.size(); i > 0; --i) {
                band += detail::fixed(sx(s.x[i - 1]), 2) + "," +
                        detail::fixed(sy(s.y[i - 1] - s.ci_half[i - 1]), 2) + " ";
            }
            band += "\"/>\n";
            svg += band;
        }
        std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                           "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            line += detail::fixed(sx(s.x[i]), 2) + "," + detail::fixed(sy(s.y[i]), 2) + " ";
        }
        line += "\"/>\n";
        svg += line;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            svg += "<circle cx=\"" + detail::fixed(sx(s.x[i]), 2) + "\" cy=\"" +
                   detail::fixed(sy(s.y[i]), 2) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
        }
        // legend
        const double ly = mt + 16.0 * static_cast<double>(si);
        svg += "<line x1=\"" + detail::fixed(width - mr - 140, 2) + "\" y1=\"" +
               detail::fixed(ly, 2) + "\" x2=\"" + detail::fixed(width - mr - 120, 2) +
               "\" y2=\"" + detail::fixed(ly, 2) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fixed(width - mr - 114, 2) + "\" y=\"" +
               detail::fixed(ly + 4, 2) + "\" font-size=\"12\">" + detail::escape_html(s.name) +
               "</text>\n";
    }
    svg += "</svg>\n";

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("render_curve_svg: cannot write " + out_path);
    out << svg;
}

} // namespace afa::viz
