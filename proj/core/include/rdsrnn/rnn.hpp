#pragma once

#include "rdsrnn/linalg.hpp"
#include "rdsrnn/random.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rdsrnn {

/// Where the recurrent connection comes from.
///  - general:     every hidden layer l < L sees the full previous feedback
///                 vector h_{t-1} = (h_1, ..., h_L).
///  - last_layer:  only the first layer sees the previous output x̂_{t-1}.
///  - memory_bank: only the first layer sees its own previous activation;
///                 a fixed offset (the half layer) follows it.
enum class FeedbackKind { general, last_layer, memory_bank };

std::string_view to_string(FeedbackKind kind);
FeedbackKind feedback_kind_from_string(std::string_view name);

struct Topology {
    /// d_{h_0} = input width, ..., d_{h_L} = output width.
    std::vector<Index> widths;
    FeedbackKind feedback = FeedbackKind::last_layer;
    /// Number of stored inputs (memory-bank only).
    std::size_t memory_horizon = 0;

    std::size_t layer_count() const { return widths.empty() ? 0 : widths.size() - 1; }
    Index input_dimension() const { return widths.front(); }
    Index output_dimension() const { return widths.back(); }
    /// Length of the feedback vector carried between steps.
    Index state_dimension() const;
    /// Number of feedback maps φ_l.
    std::size_t feedback_map_count() const;
    void validate() const;
};

struct AffineLayer {
    Matrix weight;
    Vector bias;
};

/// Layered ReLU recurrent network. layers[l] is τ_{l+1}; feedback[l] is the
/// linear map φ_{l+1} from the feedback vector into layer l+1 (constant
/// terms of φ are folded into the layer bias).
struct Network {
    Topology topology;
    std::vector<AffineLayer> layers;
    std::vector<Matrix> feedback;
    /// Memory-bank only: the half layer h_{1.5} = h_1 + memory_offset.
    Vector memory_offset;

    void validate() const;
};

/// Feedback vector: h_t (general), x̂_t (last_layer) or h_{1,t} (memory_bank).
struct NetworkState {
    Vector feedback;
};

struct StepOutput {
    Vector output;
    NetworkState next;
};

/// One application of the recurrence with σ = max{·, 0}.
StepOutput forward_step(const Network& net, const NetworkState& state, const Vector& u);

/// Outputs x̂_1..x̂_T for inputs u_1..u_T.
std::vector<Vector> rollout(const Network& net, const NetworkState& initial, std::span<const Vector> inputs);

/// Reusable evaluator with preallocated workspace for long rollouts.
class NetworkRunner {
public:
    explicit NetworkRunner(const Network& net);

    /// Advances state in place and returns the output of the step. The
    /// reference is valid until the next call.
    const Vector& step(Vector& state, const Vector& u);

private:
    const Network* net_;
    std::vector<Vector> inputs_;  // input to each layer
    std::vector<Vector> pre_;
    Vector output_;
    Vector next_state_;
};

/// Initial state whose output part is x0: x0 itself for last_layer, zero
/// hidden blocks followed by x0 for general.
NetworkState state_from_output(const Network& net, const Vector& x0);

/// Embeds a last-layer network into the general form (φ_1 reads only the
/// output block of h_{t-1}, φ_l = 0 for l ≥ 2). General networks are
/// returned unchanged.
Network to_general(const Network& net);

/// Maps a last-layer state x̂ to the general feedback vector (0, ..., 0, x̂).
NetworkState to_general_state(const Network& net, const NetworkState& state);

/// Glorot-uniform weights in ±sqrt(6/(fan_in + fan_out)), zero biases.
Network init_network(const Topology& topology, Pcg32& rng);

/// Norm-product bound ‖φ‖·‖τ_2‖···‖τ_L‖ on the Lipschitz constant of
/// x̂_{t-1} ↦ x̂_t for a last-layer network. ReLU is 1-Lipschitz, so this
/// bounds the true constant from above.
double lipschitz_feedback_bound(const Network& net);

/// Scalar one-hidden-unit network
///   x̂_t = max{0, u_t + rho − alpha·rho + b + alpha·x̂_{t−1}} − b + delta,
/// equal to the OU recursion whenever the ReLU is active and delta = 0.
Network ou_relu_network(double rho, double alpha, double bias, double delta);

/// First layer and half layer of the memory-bank construction. The first
/// hidden layer holds (t, x̂0 + b, u_t + b, ..., u_1 + b, b, ..., b); the half
/// layer subtracts b to expose (t, x̂0, u_t, ..., u_1, 0, ..., 0).
struct MemoryBank {
    Matrix input_weight;   // routes u_t into the newest slot
    Vector input_bias;     // (1, 0, b, 0, ..., 0)
    Matrix feedback;       // counter hold, x̂0 hold, slot shift
    Vector offset;         // (0, -b, ..., -b)
    NetworkState initial;  // h_{1,0}
    Index state_dimension = 0;
    Index input_dimension = 0;
    std::size_t horizon = 0;

    Index width() const { return input_bias.size(); }
};

MemoryBank build_memory_bank(Index state_dimension, Index input_dimension, std::size_t horizon, double bias,
                             const Vector& x0);

/// Memory-bank network: the constructed first layer followed by a ReLU
/// readout with the given hidden widths, Glorot-initialised.
Network memory_bank_network(const MemoryBank& bank, std::span<const Index> readout_hidden, Pcg32& rng);

/// The half-layer view h_{1.5} = h_1 + offset of a memory-bank state.
Vector memory_slots(const Network& net, const NetworkState& state);

/// 10 × the 99.9th percentile (nearest rank) of |values|; 1 if all are zero.
double calibrate_memory_bias(std::span<const double> values);

} // namespace rdsrnn
