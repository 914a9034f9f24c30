#pragma once

// Fixed-order dense kernels for small networks. Sums run left to right over
// columns so that zero blocks contribute exact zeros; this keeps a last-layer
// network and its general-form embedding bit-identical.

#include "rdsrnn/rnn.hpp"

#include <algorithm>
#include <vector>

namespace rdsrnn::detail {

// y_i = Σ_j w_ij x_j
inline void matvec(const Matrix& w, const double* x, double* y) {
    const Index rows = w.rows();
    const Index cols = w.cols();
    for (Index i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < cols; ++j) acc += w(i, j) * x[j];
        y[i] = acc;
    }
}

// y_i += Σ_j w_ij x_j, the inner sum formed first.
inline void matvec_add(const Matrix& w, const double* x, double* y) {
    const Index rows = w.rows();
    const Index cols = w.cols();
    for (Index i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < cols; ++j) acc += w(i, j) * x[j];
        y[i] += acc;
    }
}

// y_j += Σ_i w_ij g_i
inline void matvec_transpose_add(const Matrix& w, const double* g, double* y) {
    const Index rows = w.rows();
    const Index cols = w.cols();
    for (Index j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (Index i = 0; i < rows; ++i) acc += w(i, j) * g[i];
        y[j] += acc;
    }
}

// w += g xᵀ
inline void outer_add(Matrix& w, const double* g, const double* x) {
    const Index rows = w.rows();
    const Index cols = w.cols();
    for (Index j = 0; j < cols; ++j) {
        const double xj = x[j];
        for (Index i = 0; i < rows; ++i) w(i, j) += g[i] * xj;
    }
}

inline bool has_feedback(const Topology& topology, std::size_t layer) {
    if (topology.feedback == FeedbackKind::general) return layer + 1 < topology.layer_count();
    return layer == 0;
}

// Offset of hidden layer `layer` (0-based) inside the general feedback vector.
inline Index general_block_offset(const Topology& topology, std::size_t layer) {
    Index offset = 0;
    for (std::size_t l = 0; l < layer; ++l) offset += topology.widths[l + 1];
    return offset;
}

/// Activations of a single step, kept for the backward pass.
struct StepTrace {
    std::vector<Vector> layer_input;  // layer_input[l] feeds layers[l]
    std::vector<Vector> pre;          // pre-activations of hidden layers
    Vector output;
    Vector state_prev;
    Vector state_next;

    explicit StepTrace(const Topology& topology) {
        const std::size_t L = topology.layer_count();
        layer_input.resize(L);
        pre.resize(L - 1);
        for (std::size_t l = 0; l < L; ++l) layer_input[l].resize(topology.widths[l]);
        for (std::size_t l = 0; l + 1 < L; ++l) pre[l].resize(topology.widths[l + 1]);
        output.resize(topology.output_dimension());
        state_prev.resize(topology.state_dimension());
        state_next.resize(topology.state_dimension());
    }
};

/// One step of the recurrence. Reads layer_input[0] and state_prev; fills
/// pre-activations, the remaining layer inputs, output and state_next.
inline void forward_core(const Network& net, std::vector<Vector>& layer_input, std::vector<Vector>& pre,
                         Vector& output, const Vector& state_prev, Vector& state_next) {
    const Topology& topo = net.topology;
    const std::size_t L = topo.layer_count();
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const AffineLayer& layer = net.layers[l];
        Vector& z = pre[l];
        matvec(layer.weight, layer_input[l].data(), z.data());
        z += layer.bias;
        if (has_feedback(topo, l)) {
            const std::size_t f = topo.feedback == FeedbackKind::general ? l : 0;
            matvec_add(net.feedback[f], state_prev.data(), z.data());
        }
        Vector& next_in = layer_input[l + 1];
        for (Index i = 0; i < z.size(); ++i) next_in(i) = z(i) > 0.0 ? z(i) : 0.0;
        if (l == 0 && topo.feedback == FeedbackKind::memory_bank) {
            state_next = next_in;
            // The half layer: downstream layers see h_1 + offset.
            next_in += net.memory_offset;
        }
    }
    const AffineLayer& last = net.layers[L - 1];
    matvec(last.weight, layer_input[L - 1].data(), output.data());
    output += last.bias;

    if (topo.feedback == FeedbackKind::last_layer) {
        state_next = output;
    } else if (topo.feedback == FeedbackKind::general) {
        Index offset = 0;
        for (std::size_t l = 1; l < L; ++l) {
            const Index w = topo.widths[l];
            state_next.segment(offset, w) = layer_input[l];
            offset += w;
        }
        state_next.segment(offset, output.size()) = output;
    }
}

inline void forward_trace(const Network& net, StepTrace& trace) {
    forward_core(net, trace.layer_input, trace.pre, trace.output, trace.state_prev, trace.state_next);
}

} // namespace rdsrnn::detail
