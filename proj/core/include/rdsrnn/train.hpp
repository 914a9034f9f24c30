#pragma once

#include "rdsrnn/rnn.hpp"
#include "rdsrnn/system.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace rdsrnn {

/// One training or test sequence in network coordinates.
struct Sequence {
    Vector initial_state;         // x0 the rollout starts from
    std::vector<Vector> inputs;   // u_1..u_T as network inputs
    std::vector<Vector> targets;  // x_1..x_T
};

struct SequenceBatch {
    std::vector<Sequence> sequences;

    std::size_t size() const { return sequences.size(); }
    bool empty() const { return sequences.empty(); }
};

/// Network input for a realised system input: one-hot for categorical
/// systems, the vector itself otherwise.
Vector network_input(const SystemSpec& spec, const Input& u);
Index network_input_dimension(const SystemSpec& spec);

SequenceBatch to_sequences(const TrajectoryBatch& batch, const SystemSpec& spec);

/// How rollouts are initialised:
///  - teacher:    from the true x0 of each sequence;
///  - stationary: from the mean of all target states in the training data.
enum class InitPolicy { teacher, stationary };

std::string_view to_string(InitPolicy policy);
InitPolicy init_policy_from_string(std::string_view name);

/// Mean of every target state in the batch.
Vector stationary_state(const SequenceBatch& batch);

/// Feedback vector that makes the network start from x0. Memory-bank
/// networks get (0, x0 − offset_x, −offset_slots), i.e. empty slots.
NetworkState initial_network_state(const Network& net, const Vector& x0);

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct AdamParameters {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    OptimizerKind optimizer = OptimizerKind::adam;
    AdamParameters adam;
    /// Chunk length for truncated BPTT; empty means full BPTT.
    std::optional<std::size_t> truncation;
    std::uint64_t seed = 0;
    /// Global L2-norm clip on the minibatch gradient.
    std::optional<double> gradient_clip;
    InitPolicy init = InitPolicy::teacher;
    unsigned threads = 1;

    void validate() const;
};

/// Gradient with the same layout as the trainable parameters of a network.
struct NetworkGradient {
    std::vector<AffineLayer> layers;
    std::vector<Matrix> feedback;

    static NetworkGradient zeros_like(const Network& net);
    NetworkGradient& operator+=(const NetworkGradient& other);
};

/// Parameters in a fixed order: per layer the weight (column-major) then
/// the bias, followed by the feedback matrices.
std::size_t parameter_count(const Network& net);
Vector flatten_parameters(const Network& net);
void assign_parameters(Network& net, const Vector& params);
Vector flatten_gradient(const NetworkGradient& gradient);

/// Mean over sequences and time steps of ‖x̂_t − x_t‖², rolled out from
/// each sequence's initial_state.
double mse_loss(const Network& net, const SequenceBatch& batch, unsigned threads = 1);

struct LossAndGradient {
    double loss = 0.0;
    NetworkGradient gradient;
};

/// Exact reverse-mode gradient of mse_loss (ReLU subgradient 0 at 0).
/// With a truncation length k, gradients do not flow across the chunk
/// boundaries t = k, 2k, ...
LossAndGradient bptt_gradient(const Network& net, const SequenceBatch& batch,
                              std::optional<std::size_t> truncation = std::nullopt, unsigned threads = 1);

struct TrainReport {
    std::vector<double> loss_history;  // per-epoch mean minibatch loss
    Network network;
    double wall_time_seconds = 0.0;
    InitPolicy init = InitPolicy::teacher;
    /// Start state for test rollouts under the stationary policy.
    std::optional<Vector> stationary_start;
};

/// Minibatch training from a Glorot initialisation seeded by config.seed.
TrainReport train(const SequenceBatch& data, const Topology& topology, const TrainConfig& config);

/// Minibatch training from a given network. The constructed first layer of a
/// memory-bank network stays fixed.
TrainReport train(const SequenceBatch& data, Network initial, const TrainConfig& config);

} // namespace rdsrnn
