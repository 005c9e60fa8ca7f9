#pragma once

// Minimal stacked-panel SVG plotting for run reports.

#include <iosfwd>
#include <string>
#include <vector>

namespace etobs::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool scatter = false;
};

struct Panel {
    std::string title;
    std::string x_label;
    std::vector<Series> series;
};

/// Long polylines are reduced to per-bucket min/max pairs so that spikes
/// survive; scatter series are strided down to `max_points`.
[[nodiscard]] Series decimate(const Series& s, std::size_t max_points);

void write_figure(std::ostream& out, const std::vector<Panel>& panels, std::size_t max_points = 2000);

}  // namespace etobs::svg
