#include "rdsrnn/rnn.hpp"

#include "network_kernel.hpp"
#include "rdsrnn/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsrnn {

std::string_view to_string(FeedbackKind kind) {
    switch (kind) {
    case FeedbackKind::general: return "general";
    case FeedbackKind::last_layer: return "last-layer";
    case FeedbackKind::memory_bank: return "memory-bank";
    }
    return "unknown";
}

FeedbackKind feedback_kind_from_string(std::string_view name) {
    if (name == "general") return FeedbackKind::general;
    if (name == "last-layer") return FeedbackKind::last_layer;
    if (name == "memory-bank") return FeedbackKind::memory_bank;
    throw ConfigurationError(fmt::format("unknown feedback kind '{}'", name));
}

Index Topology::state_dimension() const {
    switch (feedback) {
    case FeedbackKind::last_layer: return widths.back();
    case FeedbackKind::memory_bank: return widths[1];
    case FeedbackKind::general: {
        Index total = 0;
        for (std::size_t l = 1; l < widths.size(); ++l) total += widths[l];
        return total;
    }
    }
    return 0;
}

std::size_t Topology::feedback_map_count() const {
    return feedback == FeedbackKind::general ? layer_count() - 1 : 1;
}

void Topology::validate() const {
    if (widths.size() < 3) throw ConfigurationError("a network needs at least two layers");
    for (Index w : widths)
        if (w <= 0) throw ConfigurationError("layer widths must be positive");
    if (feedback == FeedbackKind::memory_bank) {
        if (memory_horizon == 0) throw ConfigurationError("memory-bank horizon must be at least 1");
        const Index expected = 1 + widths.back() + static_cast<Index>(memory_horizon) * widths.front();
        if (widths[1] != expected)
            throw ConfigurationError(
                fmt::format("memory-bank first layer must have width {}, got {}", expected, widths[1]));
    }
}

namespace {

void check_shape(const Matrix& m, Index rows, Index cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols)
        throw SizeError(fmt::format("{} has shape {}x{}, expected {}x{}", what, m.rows(), m.cols(), rows, cols));
}

void check_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) throw NumericError(fmt::format("{} contains non-finite values", what));
}

} // namespace

void Network::validate() const {
    topology.validate();
    const std::size_t L = topology.layer_count();
    if (layers.size() != L) throw SizeError(fmt::format("expected {} layers, got {}", L, layers.size()));
    for (std::size_t l = 0; l < L; ++l) {
        const auto name = fmt::format("layer {}", l + 1);
        check_shape(layers[l].weight, topology.widths[l + 1], topology.widths[l], name);
        if (layers[l].bias.size() != topology.widths[l + 1]) throw SizeError(name + " bias has the wrong length");
        check_finite(layers[l].weight, name);
        check_finite(layers[l].bias, name);
    }
    const std::size_t maps = topology.feedback_map_count();
    if (feedback.size() != maps) throw SizeError(fmt::format("expected {} feedback maps, got {}", maps, feedback.size()));
    for (std::size_t f = 0; f < maps; ++f) {
        const auto name = fmt::format("feedback map {}", f + 1);
        check_shape(feedback[f], topology.widths[f + 1], topology.state_dimension(), name);
        check_finite(feedback[f], name);
    }
    if (topology.feedback == FeedbackKind::memory_bank) {
        if (memory_offset.size() != topology.widths[1]) throw SizeError("memory offset has the wrong length");
        check_finite(memory_offset, "memory offset");
    } else if (memory_offset.size() != 0) {
        throw ConfigurationError("memory offset is only used by memory-bank networks");
    }
}

namespace {

void check_step_args(const Network& net, const Vector& state, const Vector& u) {
    if (state.size() != net.topology.state_dimension())
        throw SizeError(fmt::format("state has length {}, expected {}", state.size(), net.topology.state_dimension()));
    if (u.size() != net.topology.input_dimension())
        throw SizeError(fmt::format("input has length {}, expected {}", u.size(), net.topology.input_dimension()));
    if (!u.allFinite()) throw NumericError("non-finite network input");
}

} // namespace

StepOutput forward_step(const Network& net, const NetworkState& state, const Vector& u) {
    net.validate();
    check_step_args(net, state.feedback, u);
    if (!state.feedback.allFinite()) throw NumericError("non-finite network state");
    detail::StepTrace trace(net.topology);
    trace.layer_input[0] = u;
    trace.state_prev = state.feedback;
    detail::forward_trace(net, trace);
    return {std::move(trace.output), NetworkState{std::move(trace.state_next)}};
}

std::vector<Vector> rollout(const Network& net, const NetworkState& initial, std::span<const Vector> inputs) {
    NetworkRunner runner(net);
    Vector state = initial.feedback;
    if (!state.allFinite()) throw NumericError("non-finite network state");
    std::vector<Vector> outputs;
    outputs.reserve(inputs.size());
    for (const Vector& u : inputs) outputs.push_back(runner.step(state, u));
    return outputs;
}

NetworkRunner::NetworkRunner(const Network& net) : net_(&net) {
    net.validate();
    const Topology& topo = net.topology;
    const std::size_t L = topo.layer_count();
    inputs_.resize(L);
    pre_.resize(L - 1);
    for (std::size_t l = 0; l < L; ++l) inputs_[l].resize(topo.widths[l]);
    for (std::size_t l = 0; l + 1 < L; ++l) pre_[l].resize(topo.widths[l + 1]);
    output_.resize(topo.output_dimension());
    next_state_.resize(topo.state_dimension());
}

const Vector& NetworkRunner::step(Vector& state, const Vector& u) {
    check_step_args(*net_, state, u);
    inputs_[0] = u;
    detail::forward_core(*net_, inputs_, pre_, output_, state, next_state_);
    state.swap(next_state_);
    return output_;
}

NetworkState state_from_output(const Network& net, const Vector& x0) {
    const Topology& topo = net.topology;
    if (x0.size() != topo.output_dimension()) throw SizeError("initial state does not match the output width");
    switch (topo.feedback) {
    case FeedbackKind::last_layer: return {x0};
    case FeedbackKind::general: {
        Vector h = Vector::Zero(topo.state_dimension());
        h.tail(x0.size()) = x0;
        return {h};
    }
    case FeedbackKind::memory_bank: break;
    }
    throw UnsupportedError("memory-bank states are built by build_memory_bank");
}

Network to_general(const Network& net) {
    net.validate();
    if (net.topology.feedback == FeedbackKind::general) return net;
    if (net.topology.feedback != FeedbackKind::last_layer)
        throw UnsupportedError("only last-layer networks embed into the general form");
    Network out;
    out.topology = net.topology;
    out.topology.feedback = FeedbackKind::general;
    out.layers = net.layers;
    const Index state_dim = out.topology.state_dimension();
    const std::size_t maps = out.topology.feedback_map_count();
    for (std::size_t f = 0; f < maps; ++f) out.feedback.push_back(Matrix::Zero(out.topology.widths[f + 1], state_dim));
    const Matrix& phi = net.feedback[0];
    out.feedback[0].rightCols(phi.cols()) = phi;
    return out;
}

NetworkState to_general_state(const Network& net, const NetworkState& state) {
    if (net.topology.feedback == FeedbackKind::general) return state;
    if (net.topology.feedback != FeedbackKind::last_layer)
        throw UnsupportedError("only last-layer states embed into the general form");
    Topology general = net.topology;
    general.feedback = FeedbackKind::general;
    Vector h = Vector::Zero(general.state_dimension());
    h.tail(state.feedback.size()) = state.feedback;
    return {h};
}

namespace {

Matrix glorot(Index rows, Index cols, Pcg32& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
}

} // namespace

Network init_network(const Topology& topology, Pcg32& rng) {
    topology.validate();
    if (topology.feedback == FeedbackKind::memory_bank)
        throw UnsupportedError("memory-bank networks are built with memory_bank_network");
    Network net;
    net.topology = topology;
    const std::size_t L = topology.layer_count();
    for (std::size_t l = 0; l < L; ++l)
        net.layers.push_back({glorot(topology.widths[l + 1], topology.widths[l], rng),
                              Vector::Zero(topology.widths[l + 1])});
    for (std::size_t f = 0; f < topology.feedback_map_count(); ++f)
        net.feedback.push_back(glorot(topology.widths[f + 1], topology.state_dimension(), rng));
    return net;
}

double lipschitz_feedback_bound(const Network& net) {
    if (net.topology.feedback != FeedbackKind::last_layer)
        throw UnsupportedError("the norm-product bound is defined for last-layer feedback only");
    net.validate();
    double bound = spectral_norm(net.feedback[0]);
    for (std::size_t l = 1; l < net.layers.size(); ++l) bound *= spectral_norm(net.layers[l].weight);
    return bound;
}

Network ou_relu_network(double rho, double alpha, double bias, double delta) {
    Network net;
    net.topology.widths = {1, 1, 1};
    net.topology.feedback = FeedbackKind::last_layer;
    net.layers.push_back({Matrix::Constant(1, 1, 1.0), Vector::Constant(1, rho - alpha * rho + bias)});
    net.layers.push_back({Matrix::Constant(1, 1, 1.0), Vector::Constant(1, -bias + delta)});
    net.feedback.push_back(Matrix::Constant(1, 1, alpha));
    net.validate();
    return net;
}

MemoryBank build_memory_bank(Index state_dimension, Index input_dimension, std::size_t horizon, double bias,
                             const Vector& x0) {
    if (horizon == 0) throw ConfigurationError("memory-bank horizon must be at least 1");
    if (!(bias > 0.0) || !std::isfinite(bias)) throw ConfigurationError("memory-bank bias must be positive");
    if (state_dimension <= 0 || input_dimension <= 0) throw ConfigurationError("dimensions must be positive");
    if (x0.size() != state_dimension) throw SizeError("x0 does not match the state dimension");

    const Index dx = state_dimension;
    const Index du = input_dimension;
    const Index T = static_cast<Index>(horizon);
    const Index width = 1 + dx + T * du;
    const Index first_slot = 1 + dx;

    MemoryBank bank;
    bank.state_dimension = dx;
    bank.input_dimension = du;
    bank.horizon = horizon;

    bank.input_weight = Matrix::Zero(width, du);
    bank.input_weight.block(first_slot, 0, du, du).setIdentity();

    bank.input_bias = Vector::Zero(width);
    bank.input_bias(0) = 1.0;
    bank.input_bias.segment(first_slot, du).setConstant(bias);

    bank.feedback = Matrix::Zero(width, width);
    bank.feedback(0, 0) = 1.0;
    bank.feedback.block(1, 1, dx, dx).setIdentity();
    if (T > 1) bank.feedback.block(first_slot + du, first_slot, (T - 1) * du, (T - 1) * du).setIdentity();

    bank.offset = Vector::Constant(width, -bias);
    bank.offset(0) = 0.0;

    // Every slot starts at b so that unfilled slots read exactly 0.
    Vector h0 = Vector::Constant(width, bias);
    h0(0) = 0.0;
    h0.segment(1, dx) = x0.array() + bias;
    bank.initial = {h0};
    return bank;
}

Network memory_bank_network(const MemoryBank& bank, std::span<const Index> readout_hidden, Pcg32& rng) {
    Network net;
    Topology& topo = net.topology;
    topo.feedback = FeedbackKind::memory_bank;
    topo.memory_horizon = bank.horizon;
    topo.widths = {bank.input_dimension, bank.width()};
    topo.widths.insert(topo.widths.end(), readout_hidden.begin(), readout_hidden.end());
    topo.widths.push_back(bank.state_dimension);
    topo.validate();

    net.layers.push_back({bank.input_weight, bank.input_bias});
    for (std::size_t l = 1; l < topo.layer_count(); ++l)
        net.layers.push_back({glorot(topo.widths[l + 1], topo.widths[l], rng), Vector::Zero(topo.widths[l + 1])});
    net.feedback.push_back(bank.feedback);
    net.memory_offset = bank.offset;
    net.validate();
    return net;
}

Vector memory_slots(const Network& net, const NetworkState& state) {
    if (net.topology.feedback != FeedbackKind::memory_bank) throw UnsupportedError("not a memory-bank network");
    if (state.feedback.size() != net.memory_offset.size()) throw SizeError("state does not match the memory bank");
    return state.feedback + net.memory_offset;
}

double calibrate_memory_bias(std::span<const double> values) {
    if (values.empty()) throw InputError("calibration batch is empty");
    std::vector<double> magnitudes;
    magnitudes.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("non-finite calibration value");
        magnitudes.push_back(std::abs(v));
    }
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.999 * static_cast<double>(magnitudes.size())));
    const std::size_t index = std::max<std::size_t>(rank, 1) - 1;
    std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(index), magnitudes.end());
    const double q = magnitudes[index];
    return q > 0.0 ? 10.0 * q : 1.0;
}

} // namespace rdsrnn
