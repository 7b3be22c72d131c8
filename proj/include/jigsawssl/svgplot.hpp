#pragma once

#include <optional>
#include <string>
#include <vector>

namespace jigsawssl {

// Minimal deterministic SVG line charts: enough for metric-vs-k curves with
// std bands and ROC plots. Output is plain text, stable across runs.
struct PlotSeries {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band_half_width;  // optional +/- band around y
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    bool log_x = false;
    bool diagonal = false;  // reference y=x line (ROC chance level)
    std::optional<double> y_min, y_max;
};

std::string render_svg_plot(const PlotSpec& spec);
void write_svg_plot(const PlotSpec& spec, const std::string& path);

}  // namespace jigsawssl
