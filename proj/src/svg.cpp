#include "etobs/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace etobs::svg {

namespace {

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 230.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    void finish() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

void write_panel(std::ostream& out, const Panel& p, double y0, std::size_t max_points) {
    Range xr;
    Range yr;
    std::vector<Series> reduced;
    for (const auto& s : p.series) {
        reduced.push_back(decimate(s, max_points));
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr.finish();
    yr.finish();
    const double w = kWidth - kLeft - kRight;
    const double h = kPanelHeight - kTop - kBottom;
    auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * w; };
    auto sy = [&](double v) { return y0 + kTop + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };

    out << "<text x=\"" << px(kLeft) << "\" y=\"" << px(y0 + 18) << "\" font-size=\"14\">" << escape(p.title)
        << "</text>\n";
    out << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(y0 + kTop) << "\" width=\"" << px(w) << "\" height=\"" << px(h)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
        const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        out << "<text x=\"" << px(sx(xv)) << "\" y=\"" << px(y0 + kTop + h + 15)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
        out << "<text x=\"" << px(kLeft - 5) << "\" y=\"" << px(sy(yv) + 3)
            << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
        out << "<line x1=\"" << px(kLeft) << "\" x2=\"" << px(kLeft + w) << "\" y1=\"" << px(sy(yv)) << "\" y2=\""
            << px(sy(yv)) << "\" stroke=\"#ddd\"/>\n";
    }
    out << "<text x=\"" << px(kLeft + w / 2) << "\" y=\"" << px(y0 + kPanelHeight - 5)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(p.x_label) << "</text>\n";

    for (std::size_t i = 0; i < reduced.size(); ++i) {
        const auto& s = reduced[i];
        const char* color = kColors[i % std::size(kColors)];
        if (s.scatter) {
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
                out << "<circle cx=\"" << px(sx(s.x[k])) << "\" cy=\"" << px(sy(s.y[k])) << "\" r=\"1.8\" fill=\""
                    << color << "\"/>\n";
            }
        } else if (!s.x.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
                out << px(sx(s.x[k])) << ',' << px(sy(s.y[k])) << ' ';
            }
            out << "\"/>\n";
        }
        out << "<text x=\"" << px(kLeft + w - 5) << "\" y=\"" << px(y0 + kTop + 14 + 13.0 * static_cast<double>(i))
            << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(s.label) << "</text>\n";
    }
}

}  // namespace

Series decimate(const Series& s, std::size_t max_points) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (max_points < 4 || n <= max_points) return s;
    Series out{s.label, {}, {}, s.scatter};
    if (s.scatter) {
        const std::size_t stride = (n + max_points - 1) / max_points;
        for (std::size_t k = 0; k < n; k += stride) {
            out.x.push_back(s.x[k]);
            out.y.push_back(s.y[k]);
        }
        return out;
    }
    const std::size_t buckets = max_points / 2;
    for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t lo = b * n / buckets;
        const std::size_t hi = (b + 1) * n / buckets;
        if (lo >= hi) continue;
        std::size_t imin = lo;
        std::size_t imax = lo;
        for (std::size_t k = lo; k < hi; ++k) {
            if (s.y[k] < s.y[imin]) imin = k;
            if (s.y[k] > s.y[imax]) imax = k;
        }
        for (std::size_t k : {std::min(imin, imax), std::max(imin, imax)}) {
            out.x.push_back(s.x[k]);
            out.y.push_back(s.y[k]);
        }
    }
    return out;
}

void write_figure(std::ostream& out, const std::vector<Panel>& panels, std::size_t max_points) {
    const double height = kPanelHeight * static_cast<double>(panels.size());
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(kWidth) << "\" height=\"" << px(height)
        << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        write_panel(out, panels[i], kPanelHeight * static_cast<double>(i), max_points);
    }
    out << "</svg>\n";
}

}  // namespace etobs::svg
