#include "jigsawssl/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace jigsawssl {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 610, kTop = 50, kBottom = 390;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string render_svg_plot(const PlotSpec& spec) {
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : spec.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double xv = spec.log_x ? std::log10(s.x[i]) : s.x[i];
            x_min = std::min(x_min, xv);
            x_max = std::max(x_max, xv);
            const double half =
                i < s.band_half_width.size() ? std::abs(s.band_half_width[i]) : 0.0;
            y_min = std::min(y_min, s.y[i] - half);
            y_max = std::max(y_max, s.y[i] + half);
        }
    }
    if (x_min > x_max) { x_min = 0; x_max = 1; y_min = 0; y_max = 1; }
    if (spec.y_min) y_min = *spec.y_min;
    if (spec.y_max) y_max = *spec.y_max;
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;

    const auto px = [&](double x) {
        const double v = spec.log_x ? std::log10(x) : x;
        return kLeft + (v - x_min) / (x_max - x_min) * (kRight - kLeft);
    };
    const auto py = [&](double y) {
        return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << (kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title << "</text>\n";

    // Axes.
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
        << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << kBottom << "\" stroke=\"black\"/>\n";

    for (int t = 0; t <= 5; ++t) {
        const double fy = y_min + (y_max - y_min) * t / 5.0;
        const double yy = py(fy);
        out << "<line x1=\"" << (kLeft - 4) << "\" y1=\"" << fmt(yy) << "\" x2=\"" << kRight
            << "\" y2=\"" << fmt(yy) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << (kLeft - 8) << "\" y=\"" << fmt(yy + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fy)
            << "</text>\n";
    }
    // X ticks at the data points of the first series (the sweep's k values).
    if (!spec.series.empty()) {
        for (double xv : spec.series.front().x) {
            const double xx = px(xv);
            out << "<line x1=\"" << fmt(xx) << "\" y1=\"" << kBottom << "\" x2=\"" << fmt(xx)
                << "\" y2=\"" << (kBottom + 4) << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << fmt(xx) << "\" y=\"" << (kBottom + 18)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << fmt(xv) << "</text>\n";
        }
    }
    out << "<text x=\"" << (kWidth / 2) << "\" y=\"" << (kHeight - 10)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << spec.x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << ((kTop + kBottom) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << ((kTop + kBottom) / 2) << ")\">" << spec.y_label
        << "</text>\n";

    if (spec.diagonal) {
        out << "<line x1=\"" << fmt(px(x_min)) << "\" y1=\"" << fmt(py(y_min)) << "\" x2=\""
            << fmt(px(x_max)) << "\" y2=\"" << fmt(py(y_max))
            << "\" stroke=\"#999999\" stroke-dasharray=\"5,4\"/>\n";
    }

    for (const auto& s : spec.series) {
        if (!s.band_half_width.empty()) {
            std::ostringstream pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                pts << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] + s.band_half_width[i])) << ' ';
            }
            for (std::size_t i = s.x.size(); i-- > 0;) {
                pts << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] - s.band_half_width[i])) << ' ';
            }
            out << "<polygon points=\"" << pts.str() << "\" fill=\"" << s.color
                << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            pts << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
        }
        out << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
                << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        }
    }

    // Legend.
    double ly = kTop + 8;
    for (const auto& s : spec.series) {
        out << "<line x1=\"" << (kRight - 150) << "\" y1=\"" << fmt(ly) << "\" x2=\""
            << (kRight - 120) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << (kRight - 112) << "\" y=\"" << fmt(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
        ly += 18;
    }

    out << "</svg>\n";
    return out.str();
}

void write_svg_plot(const PlotSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_svg_plot: cannot open " + path);
    out << render_svg_plot(spec);
}

}  // namespace jigsawssl
