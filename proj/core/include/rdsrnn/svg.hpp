#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rdsrnn {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    int width = 800;
    int height = 500;
    /// Scatter plots keep every k-th point so at most this many marks remain.
    std::size_t max_marks = 50'000;
};

/// One polyline per series, with axes and a legend. Throws InputError when
/// there is nothing to draw.
std::string render_line_plot(std::span<const Series> series, const PlotOptions& options);

std::string render_scatter(std::span<const double> x, std::span<const double> y, const PlotOptions& options);

/// Renders first, so a failed render leaves no file behind.
void emit_line_plot(const std::filesystem::path& path, std::span<const Series> series, const PlotOptions& options);
void emit_scatter(const std::filesystem::path& path, std::span<const double> x, std::span<const double> y,
                  const PlotOptions& options);

} // namespace rdsrnn
