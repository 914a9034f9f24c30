#include "rdsrnn/csv.hpp"

#include "rdsrnn/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>

namespace rdsrnn {

std::string format_double(double value) { return fmt::format("{}", value); }

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
    if (header.empty()) throw InputError("CSV header is empty");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvTable::add_row(std::span<const double> values) {
    if (values.size() != columns_)
        throw InputError(fmt::format("CSV row has {} cells, expected {}", values.size(), columns_));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) text_ += ',';
        if (!std::isnan(values[i])) text_ += format_double(values[i]);
    }
    text_ += '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

CsvTable curve_table(const ErrorCurve& curve) {
    CsvTable table({"t", "rmse"});
    for (std::size_t t = 1; t <= curve.horizon(); ++t) {
        const double row[] = {static_cast<double>(t), curve.at(t)};
        table.add_row(row);
    }
    return table;
}

namespace {

std::vector<std::string> state_input_header(Index dx, Index du) {
    std::vector<std::string> header{"t"};
    for (Index i = 0; i < dx; ++i) header.push_back(fmt::format("x_{}", i));
    for (Index i = 0; i < du; ++i) header.push_back(fmt::format("u_{}", i));
    return header;
}

} // namespace

CsvTable trajectory_table(const Trajectory& trajectory) {
    if (trajectory.states.empty()) throw InputError("trajectory has no states");
    const Index dx = trajectory.states.front().size();
    const Index du = trajectory.inputs.empty() ? 1 : input_values(trajectory.inputs.front()).size();
    CsvTable table(state_input_header(dx, du));
    std::vector<double> row(static_cast<std::size_t>(1 + dx + du));
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
        row[0] = static_cast<double>(t);
        for (Index i = 0; i < dx; ++i) row[static_cast<std::size_t>(1 + i)] = trajectory.states[t](i);
        const Vector u = t == 0 ? Vector::Constant(du, std::numeric_limits<double>::quiet_NaN())
                                : input_values(trajectory.inputs[t - 1]);
        for (Index i = 0; i < du; ++i) row[static_cast<std::size_t>(1 + dx + i)] = u(i);
        table.add_row(row);
    }
    return table;
}

CsvTable kalman_table(const FilterPath& path) {
    const auto& signal = path.data.signal;
    if (signal.empty() || path.states.size() != signal.size()) throw InputError("filter path is inconsistent");
    const Index dz = signal.front().size();
    const Index du = path.data.observations.empty() ? 1 : path.data.observations.front().size();
    const Index df = encoded_dimension(dz);
    std::vector<std::string> header = state_input_header(dz, du);
    for (Index i = 0; i < df; ++i) header.push_back(fmt::format("f_{}", i));
    CsvTable table(std::move(header));
    std::vector<double> row(static_cast<std::size_t>(1 + dz + du + df));
    for (std::size_t t = 0; t < signal.size(); ++t) {
        std::size_t pos = 0;
        row[pos++] = static_cast<double>(t);
        for (Index i = 0; i < dz; ++i) row[pos++] = signal[t](i);
        for (Index i = 0; i < du; ++i)
            row[pos++] = t == 0 ? std::numeric_limits<double>::quiet_NaN() : path.data.observations[t - 1](i);
        const Vector f = encode_filter_state(path.states[t]);
        for (Index i = 0; i < df; ++i) row[pos++] = f(i);
        table.add_row(row);
    }
    return table;
}

CsvTable loss_table(std::span<const double> losses) {
    CsvTable table({"epoch", "loss"});
    for (std::size_t e = 0; e < losses.size(); ++e) {
        const double row[] = {static_cast<double>(e + 1), losses[e]};
        table.add_row(row);
    }
    return table;
}

} // namespace rdsrnn
