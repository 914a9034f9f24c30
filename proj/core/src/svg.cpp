#include "rdsrnn/svg.hpp"

#include "rdsrnn/csv.hpp"
#include "rdsrnn/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace rdsrnn {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    bool empty() const { return !(lo <= hi); }

    /// Widens by 5% of the span on each side (or of |value| when flat).
    void pad() {
        double span = hi - lo;
        if (span <= 0.0) span = std::abs(lo) > 0.0 ? std::abs(lo) : 1.0;
        lo -= 0.05 * span;
        hi += 0.05 * span;
    }
};

class Canvas {
public:
    Canvas(const PlotOptions& options, Range x, Range y) : options_(options), x_(x), y_(y) {
        plot_w_ = options.width - kLeft - kRight;
        plot_h_ = options.height - kTop - kBottom;
        text_ += fmt::format(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
            options.width, options.height);
        text_ += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", options.width, options.height);
        axes();
    }

    double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_w_; }
    double py(double y) const { return kTop + (y_.hi - y) / (y_.hi - y_.lo) * plot_h_; }

    std::string& text() { return text_; }

    std::string finish() {
        text_ += "</svg>\n";
        return std::move(text_);
    }

private:
    void axes() {
        text_ += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                             "stroke=\"black\"/>\n",
                             kLeft, kTop, plot_w_, plot_h_);
        for (int i = 0; i <= 4; ++i) {
            const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
            const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
            const double sx = px(fx);
            const double sy = py(fy);
            const double label_y = options_.log_y ? std::pow(10.0, fy) : fy;
            text_ += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n",
                                 sx, kTop + plot_h_, kTop + plot_h_ + 5.0);
            text_ += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{:.4g}</text>\n",
                                 sx, kTop + plot_h_ + 18.0, fx);
            text_ += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"black\"/>\n",
                                 kLeft - 5.0, sy, kLeft);
            text_ += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n",
                                 kLeft - 8.0, sy + 4.0, label_y);
        }
        if (!options_.title.empty())
            text_ += fmt::format("<text x=\"{:.2f}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
                                 kLeft + plot_w_ / 2.0, escape(options_.title));
        if (!options_.x_label.empty())
            text_ += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                                 kLeft + plot_w_ / 2.0, static_cast<double>(options_.height) - 10.0,
                                 escape(options_.x_label));
        if (!options_.y_label.empty()) {
            const std::string label = options_.log_y ? options_.y_label + " (log scale)" : options_.y_label;
            text_ += fmt::format("<text x=\"16\" y=\"{0:.2f}\" font-size=\"12\" text-anchor=\"middle\" "
                                 "transform=\"rotate(-90 16 {0:.2f})\">{1}</text>\n",
                                 kTop + plot_h_ / 2.0, escape(label));
        }
    }

    const PlotOptions& options_;
    Range x_;
    Range y_;
    double plot_w_ = 0.0;
    double plot_h_ = 0.0;
    std::string text_;
};

void check_options(const PlotOptions& options) {
    if (options.width <= kLeft + kRight + 10 || options.height <= kTop + kBottom + 10)
        throw ConfigurationError("plot is too small");
    if (options.max_marks == 0) throw ConfigurationError("max_marks must be positive");
}

bool usable(double x, double y, bool log_y) { return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0.0); }

double transform_y(double y, bool log_y) { return log_y ? std::log10(y) : y; }

} // namespace

std::string render_line_plot(std::span<const Series> series, const PlotOptions& options) {
    check_options(options);
    Range xr;
    Range yr;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size()) throw InputError(fmt::format("series '{}' has mismatched x and y", s.label));
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(s.x[i], s.y[i], options.log_y)) continue;
            xr.add(s.x[i]);
            yr.add(transform_y(s.y[i], options.log_y));
        }
    }
    if (xr.empty()) throw InputError("nothing to plot");
    if (xr.hi == xr.lo) xr.pad();
    yr.pad();

    Canvas canvas(options, xr, yr);
    std::string& out = canvas.text();
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const char* colour = kPalette[k % kPalette.size()];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(s.x[i], s.y[i], options.log_y)) continue;
            if (!points.empty()) points += ' ';
            points += fmt::format("{:.2f},{:.2f}", canvas.px(s.x[i]), canvas.py(transform_y(s.y[i], options.log_y)));
        }
        if (points.empty()) continue;
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n", colour, points);
    }

    const std::size_t legend_rows = std::min<std::size_t>(series.size(), 12);
    for (std::size_t k = 0; k < legend_rows; ++k) {
        if (series[k].label.empty()) continue;
        const double y = kTop + 14.0 + 14.0 * static_cast<double>(k);
        const double x = kLeft + 10.0;
        out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                           x, y - 4.0, x + 18.0, y - 4.0, kPalette[k % kPalette.size()]);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n", x + 24.0, y,
                           escape(series[k].label));
    }
    if (series.size() > legend_rows)
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">+{} more</text>\n", kLeft + 34.0,
                           kTop + 14.0 + 14.0 * static_cast<double>(legend_rows), series.size() - legend_rows);
    return canvas.finish();
}

std::string render_scatter(std::span<const double> x, std::span<const double> y, const PlotOptions& options) {
    check_options(options);
    if (x.size() != y.size()) throw InputError("scatter x and y differ in length");
    const std::size_t stride = std::max<std::size_t>(1, (x.size() + options.max_marks - 1) / options.max_marks);
    Range xr;
    Range yr;
    for (std::size_t i = 0; i < x.size(); i += stride) {
        if (!usable(x[i], y[i], options.log_y)) continue;
        xr.add(x[i]);
        yr.add(transform_y(y[i], options.log_y));
    }
    if (xr.empty()) throw InputError("nothing to plot");
    xr.pad();
    yr.pad();

    Canvas canvas(options, xr, yr);
    std::string& out = canvas.text();
    out += "<path fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1\" d=\"";
    for (std::size_t i = 0; i < x.size(); i += stride) {
        if (!usable(x[i], y[i], options.log_y)) continue;
        out += fmt::format("M{:.1f} {:.1f}h1", canvas.px(x[i]), canvas.py(transform_y(y[i], options.log_y)));
    }
    out += "\"/>\n";
    return canvas.finish();
}

void emit_line_plot(const std::filesystem::path& path, std::span<const Series> series, const PlotOptions& options) {
    write_text_file(path, render_line_plot(series, options));
}

void emit_scatter(const std::filesystem::path& path, std::span<const double> x, std::span<const double> y,
                  const PlotOptions& options) {
    write_text_file(path, render_scatter(x, y, options));
}

} // namespace rdsrnn
