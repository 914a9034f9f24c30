#pragma once

#include "rdsrnn/kalman.hpp"
#include "rdsrnn/metrics.hpp"
#include "rdsrnn/system.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rdsrnn {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Minimal CSV builder: a header row, then numeric rows of the same width.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    /// Empty cells are written for NaN entries.
    void add_row(std::span<const double> values);
    const std::string& text() const { return text_; }
    std::size_t columns() const { return columns_; }

private:
    std::string text_;
    std::size_t columns_;
};

/// Writes text to path, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// `t,rmse` rows for t = 1..T.
CsvTable curve_table(const ErrorCurve& curve);

/// `t,x_0..x_{d-1},u_0..u_{d_u-1}`; the t = 0 row leaves the input cells
/// empty. Categorical inputs are written as the map index.
CsvTable trajectory_table(const Trajectory& trajectory);

/// Trajectory columns followed by the encoded filter state f_0..f_{k-1}.
CsvTable kalman_table(const FilterPath& path);

/// `epoch,loss`.
CsvTable loss_table(std::span<const double> losses);

} // namespace rdsrnn
