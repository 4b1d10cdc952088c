#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "heatring/format.hpp"
#include "heatring/grid.hpp"

// Minimal SVG charts for the three result tables. Output is a pure function of
// the input rows (no timestamps), so reruns are byte-identical.

namespace heatring::svg {

struct BandPoint {
    double x = 0.0;
    double mean = kNoData;
    double min = kNoData;
    double max = kNoData;
    double lo = kNoData;
    double hi = kNoData;
};

struct Bar {
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;
};

namespace detail {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

struct Frame {
    double x0, x1, y0, y1;

    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline std::string num(double v) { return format_sig(v, 6); }

inline Frame make_frame(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    return {x0, x1, y0 - pad, y1 + pad};
}

inline std::string header(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + num(kWidth / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::string s;
    const double xa = f.px(f.x0), xb = f.px(f.x1), ya = f.py(f.y0), yb = f.py(f.y1);
    s += "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
    s += "<line x1=\"" + num(xa) + "\" y1=\"" + num(ya) + "\" x2=\"" + num(xb) + "\" y2=\"" + num(ya) + "\"/>\n";
    s += "<line x1=\"" + num(xa) + "\" y1=\"" + num(ya) + "\" x2=\"" + num(xa) + "\" y2=\"" + num(yb) + "\"/>\n";
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int t = 0; t <= 5; ++t) {
        const double xv = f.x0 + (f.x1 - f.x0) * t / 5.0;
        const double yv = f.y0 + (f.y1 - f.y0) * t / 5.0;
        s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(ya + 16) + "\" text-anchor=\"middle\">" + num(xv) +
             "</text>\n";
        s += "<text x=\"" + num(xa - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + num((xa + xb) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" + xlabel +
         "</text>\n";
    s += "<text transform=\"translate(16 " + num((ya + yb) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" + ylabel +
         "</text>\n</g>\n";
    return s;
}

} // namespace detail

/// Mean line, min-max shading and lo-hi whiskers.
inline std::string band_chart(const std::vector<BandPoint>& pts, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
    using namespace detail;
    std::vector<BandPoint> v;
    for (const auto& p : pts)
        if (is_valid(p.mean)) v.push_back(p);
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!v.empty()) {
        x0 = v.front().x;
        x1 = v.back().x;
        y0 = v.front().min;
        y1 = v.front().max;
        for (const auto& p : v) {
            y0 = std::min(y0, p.min);
            y1 = std::max(y1, p.max);
        }
    }
    const auto f = make_frame(x0, x1, std::min(y0, 0.0), y1);
    std::string s = header(title) + axes(f, xlabel, ylabel);
    if (!v.empty()) {
        std::string poly;
        for (const auto& p : v) poly += num(f.px(p.x)) + "," + num(f.py(p.max)) + " ";
        for (auto it = v.rbegin(); it != v.rend(); ++it) poly += num(f.px(it->x)) + "," + num(f.py(it->min)) + " ";
        s += "<polygon points=\"" + poly + "\" fill=\"#f4a6a6\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
        s += "<g stroke=\"#555555\" stroke-width=\"1\">\n";
        for (const auto& p : v) {
            const double x = f.px(p.x);
            s += "<line x1=\"" + num(x) + "\" y1=\"" + num(f.py(p.lo)) + "\" x2=\"" + num(x) + "\" y2=\"" +
                 num(f.py(p.hi)) + "\"/>\n";
            s += "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(f.py(p.hi)) + "\" x2=\"" + num(x + 4) + "\" y2=\"" +
                 num(f.py(p.hi)) + "\"/>\n";
            s += "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(f.py(p.lo)) + "\" x2=\"" + num(x + 4) + "\" y2=\"" +
                 num(f.py(p.lo)) + "\"/>\n";
        }
        s += "</g>\n";
        std::string line;
        for (const auto& p : v) line += num(f.px(p.x)) + "," + num(f.py(p.mean)) + " ";
        s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    }
    return s + "</svg>\n";
}

inline std::string bar_chart(const std::vector<Bar>& bars, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel) {
    using namespace detail;
    double x1 = 1.0, y1 = 1.0;
    for (const auto& b : bars) {
        x1 = std::max(x1, b.hi);
        y1 = std::max(y1, b.value);
    }
    const auto f = make_frame(0.0, x1, 0.0, y1);
    std::string s = header(title) + axes(f, xlabel, ylabel);
    s += "<g fill=\"#1f77b4\" stroke=\"white\" stroke-width=\"0.5\">\n";
    for (const auto& b : bars) {
        const double xa = f.px(b.lo), xb = f.px(b.hi), ya = f.py(b.value), yb = f.py(0.0);
        s += "<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(xb - xa) + "\" height=\"" +
             num(yb - ya) + "\"/>\n";
    }
    return s + "</g>\n</svg>\n";
}

} // namespace heatring::svg
