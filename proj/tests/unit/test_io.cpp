#include "rdsrnn/csv.hpp"
#include "rdsrnn/error.hpp"
#include "rdsrnn/presets.hpp"
#include "rdsrnn/serialization.hpp"
#include "rdsrnn/svg.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace rdsrnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rdsrnn_unit_io";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bits(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Index i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
    return true;
}

Network awkward_network(Pcg32& rng) {
    Network net = init_network(Topology{{3, 4, 5, 2}, FeedbackKind::general, 0}, rng);
    for (AffineLayer& layer : net.layers)
        for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.normal() * std::pow(10.0, 60 * rng.uniform() - 30);
    net.layers[0].weight(0, 0) = std::numeric_limits<double>::denorm_min();
    net.layers[0].weight(1, 0) = -0.0;
    net.layers[0].weight(2, 0) = std::numeric_limits<double>::max();
    net.layers[0].weight(3, 0) = 0.1;
    return net;
}

} // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
    Pcg32 rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.normal() * std::pow(10.0, 40 * rng.uniform() - 20);
        ASSERT_EQ(std::stod(format_double(x)), x);
    }
}

TEST(Csv, CurveHeaderAndRows) {
    ErrorCurve curve;
    curve.values = {0.5, 0.25};
    EXPECT_EQ(curve_table(curve).text(), "t,rmse\n1,0.5\n2,0.25\n");
}

TEST(Csv, TrajectoryLayout) {
    const Trajectory traj = simulate(presets::barnsley_fern_system(), Vector::Zero(2), 2, 1);
    const std::string text = trajectory_table(traj).text();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,x_0,x_1,u_0");
    EXPECT_NE(text.find("\n0,0,0,\n"), std::string::npos);
    const auto lines = std::count(text.begin(), text.end(), '\n');
    EXPECT_EQ(lines, 4);
}

TEST(Csv, KalmanAppendsFilterState) {
    const LgssmModel model{Matrix::Constant(1, 1, 0.9), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                           Vector::Zero(1), Matrix::Ones(1, 1)};
    const std::string text = kalman_table(run_filter(model, 3, 1)).text();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,x_0,u_0,f_0,f_1");
}

TEST(Csv, RowWidthChecked) {
    CsvTable table({"a", "b"});
    const std::vector<double> row{1.0};
    EXPECT_THROW(table.add_row(row), InputError);
    const std::vector<double> with_nan{1.0, std::nan("")};
    table.add_row(with_nan);
    EXPECT_EQ(table.text(), "a,b\n1,\n");
}

TEST(Json, MatrixAndScalarShortcut) {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    EXPECT_EQ(matrix_from_json(matrix_to_json(m)), m);
    EXPECT_EQ(matrix_to_json(m).dump(), "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
    EXPECT_EQ(matrix_from_json(Json(2.5)), Matrix::Constant(1, 1, 2.5));
    EXPECT_EQ(vector_from_json(Json(2.5)), Vector::Constant(1, 2.5));
    EXPECT_THROW(matrix_from_json(Json::parse("[[1,2],[3]]")), ConfigurationError);
}

TEST(Json, NetworkRoundTripIsBitExact) {
    Pcg32 rng(2);
    const Network net = awkward_network(rng);
    const NetworkState state{Vector::LinSpaced(net.topology.state_dimension(), -1.0, 1.0 / 3.0)};
    const Json doc = Json::parse(network_to_json(net, state).dump(2));
    const Network back = network_from_json(doc);
    EXPECT_EQ(back.topology.widths, net.topology.widths);
    EXPECT_EQ(back.topology.feedback, net.topology.feedback);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        EXPECT_TRUE(same_bits(back.layers[l].weight, net.layers[l].weight));
        EXPECT_TRUE(same_bits(back.layers[l].bias, net.layers[l].bias));
    }
    for (std::size_t f = 0; f < net.feedback.size(); ++f) EXPECT_TRUE(same_bits(back.feedback[f], net.feedback[f]));
    const auto back_state = network_state_from_json(doc);
    ASSERT_TRUE(back_state.has_value());
    EXPECT_TRUE(same_bits(back_state->feedback, state.feedback));
}

TEST(Json, MemoryBankNetworkRoundTrip) {
    const MemoryBank bank = build_memory_bank(2, 1, 3, 17.5, Vector::Ones(2));
    Pcg32 rng(3);
    const std::vector<Index> readout{4};
    const Network net = memory_bank_network(bank, readout, rng);
    const Network back = network_from_json(network_to_json(net, bank.initial));
    EXPECT_EQ(back.topology.memory_horizon, 3u);
    EXPECT_EQ(back.memory_offset, net.memory_offset);
    EXPECT_EQ(back.feedback[0], net.feedback[0]);
}

TEST(Json, NetworkDocumentChecks) {
    Json doc = network_to_json(ou_relu_network(1.0, 0.5, 10.0, 0.0));
    EXPECT_EQ(doc.at("format"), "rdsrnn-network");
    doc["version"] = 99;
    EXPECT_THROW(network_from_json(doc), ConfigurationError);
    Json wrong = network_to_json(ou_relu_network(1.0, 0.5, 10.0, 0.0));
    wrong["format"] = "something-else";
    EXPECT_THROW(network_from_json(wrong), ConfigurationError);
}

TEST(Json, SystemRoundTrips) {
    for (const SystemSpec& spec : {presets::barnsley_fern_system(), presets::simplified_fern_system(),
                                   presets::ou_system(20.0, 0.99, 1.0)}) {
        const SystemSpec back = system_from_json(system_to_json(spec));
        EXPECT_EQ(back.kind_name(), spec.kind_name());
        EXPECT_EQ(system_to_json(back), system_to_json(spec));
    }
    LinearSystem lin;
    lin.a = 0.5 * Matrix::Identity(2, 2);
    lin.b = Matrix::Ones(2, 1);
    Ar1Input ar{Matrix::Constant(1, 1, 0.9), GaussianInput{Vector::Zero(1), Matrix::Ones(1, 1)}, Vector::Zero(1),
                Matrix::Ones(1, 1)};
    lin.input.kind = ar;
    const SystemSpec spec{lin};
    EXPECT_EQ(system_to_json(system_from_json(system_to_json(spec))), system_to_json(spec));
    EXPECT_THROW(system_from_json(Json::parse(R"({"kind": "chaos"})")), ConfigurationError);
}

TEST(Json, PresetShortcut) {
    const SystemSpec spec = system_from_json(Json::parse(R"({"kind": "ifs", "preset": "barnsley-fern"})"));
    EXPECT_EQ(system_to_json(spec), system_to_json(presets::barnsley_fern_system()));
}

TEST(Json, TrainConfigRoundTrip) {
    TrainConfig c;
    c.learning_rate = 0.0123;
    c.batch_size = 7;
    c.optimizer = OptimizerKind::sgd;
    c.truncation = 5;
    c.gradient_clip = 2.5;
    c.init = InitPolicy::stationary;
    c.seed = 99;
    const TrainConfig back = train_config_from_json(train_config_to_json(c));
    EXPECT_EQ(train_config_to_json(back), train_config_to_json(c));
    const TrainConfig partial = train_config_from_json(Json::parse(R"({"epochs": 3, "truncation": "full"})"));
    EXPECT_EQ(partial.epochs, 3u);
    EXPECT_FALSE(partial.truncation.has_value());
    EXPECT_EQ(partial.learning_rate, TrainConfig{}.learning_rate);
}

TEST(Json, LgssmAndReports) {
    const LgssmModel model{Matrix::Constant(1, 1, 0.9), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                           Vector::Zero(1), Matrix::Ones(1, 1)};
    EXPECT_EQ(lgssm_to_json(lgssm_from_json(lgssm_to_json(model))), lgssm_to_json(model));
    const ContractionReport report = exact_contraction_report(presets::two_map_average_contraction(), 4, 1.0);
    const ContractionReport back = contraction_report_from_json(contraction_report_to_json(report));
    ASSERT_EQ(back.window_bounds.size(), 4u);
    EXPECT_EQ(back.window_bounds[1].bound, report.window_bounds[1].bound);
    EXPECT_EQ(back.fit.lambda, report.fit.lambda);
    TrainReport tr;
    tr.loss_history = {1.0, 0.5};
    tr.network = ou_relu_network(0.0, 0.5, 10.0, 0.0);
    tr.stationary_start = Vector::Ones(1);
    const TrainReport tr_back = train_report_from_json(train_report_to_json(tr));
    EXPECT_EQ(tr_back.loss_history, tr.loss_history);
    EXPECT_EQ(*tr_back.stationary_start, *tr.stationary_start);
}

TEST(Json, Files) {
    const fs::path path = scratch("nested/doc.json");
    fs::remove_all(path.parent_path());
    write_json_file(path, Json{{"a", 1}});
    EXPECT_EQ(read_json_file(path).at("a"), 1);
    EXPECT_THROW(read_json_file(scratch("missing.json")), IoError);
    std::ofstream(scratch("broken.json")) << "{not json";
    EXPECT_THROW(read_json_file(scratch("broken.json")), ConfigurationError);
}

TEST(Svg, LinePlotIsDeterministic) {
    const std::vector<Series> series{{"flat", {1, 2, 3}, {2, 2, 2}}, {"rise", {1, 2, 3}, {1, 2, 4}}};
    PlotOptions options;
    options.title = "a <b> & c";
    const std::string a = render_line_plot(series, options);
    const std::string b = render_line_plot(series, options);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("<polyline"), std::string::npos);
    EXPECT_NE(a.find("a &lt;b&gt; &amp; c"), std::string::npos);
    EXPECT_NE(a.find("rise"), std::string::npos);
}

TEST(Svg, SingleFlatCurve) {
    const std::vector<Series> series{{"flat", {1, 2, 3, 4}, {5, 5, 5, 5}}};
    const std::string svg = render_line_plot(series, PlotOptions{});
    std::size_t count = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
        ++count;
    EXPECT_EQ(count, 1u);
}

TEST(Svg, LogScaleNeedsPositiveValues) {
    PlotOptions options;
    options.log_y = true;
    const std::vector<Series> ok{{"g", {1, 2, 3}, {1, 10, 100}}};
    EXPECT_NO_THROW(render_line_plot(ok, options));
    const std::vector<Series> bad{{"z", {1, 2}, {0, 0}}};
    EXPECT_THROW(render_line_plot(bad, options), InputError);
}

TEST(Svg, EmptyInputWritesNothing) {
    const fs::path path = scratch("empty.svg");
    fs::remove(path);
    EXPECT_THROW(emit_line_plot(path, std::vector<Series>{}, PlotOptions{}), InputError);
    EXPECT_FALSE(fs::exists(path));
    const std::vector<double> none;
    EXPECT_THROW(emit_scatter(path, none, none, PlotOptions{}), InputError);
    EXPECT_FALSE(fs::exists(path));
}

TEST(Svg, ScatterDecimation) {
    const Trajectory traj = simulate(presets::barnsley_fern_system(), Vector::Zero(2), 100000, 1);
    std::vector<double> x;
    std::vector<double> y;
    for (const Vector& s : traj.states) {
        x.push_back(s(0));
        y.push_back(s(1));
    }
    const fs::path path = scratch("fern.svg");
    emit_scatter(path, x, y, PlotOptions{});
    const std::string svg = slurp(path);
    EXPECT_LE(svg.size(), 5u * 1024 * 1024);
    const auto marks = std::count(svg.begin(), svg.end(), 'M');
    EXPECT_LE(marks, 50000);
    EXPECT_GE(marks, 25000);
    EXPECT_EQ(svg, render_scatter(x, y, PlotOptions{}));
}
