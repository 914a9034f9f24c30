#include "rdsrnn/train.hpp"

#include "network_kernel.hpp"
#include "rdsrnn/error.hpp"
#include "rdsrnn/parallel.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <numeric>

namespace rdsrnn {

Index network_input_dimension(const SystemSpec& spec) {
    return spec.categorical() ? static_cast<Index>(spec.category_count()) : spec.input_dimension();
}

Vector network_input(const SystemSpec& spec, const Input& u) {
    if (spec.categorical()) {
        const auto* index = std::get_if<std::size_t>(&u);
        if (index == nullptr || *index >= spec.category_count()) throw InputError("invalid categorical input");
        Vector v = Vector::Zero(static_cast<Index>(spec.category_count()));
        v(static_cast<Index>(*index)) = 1.0;
        return v;
    }
    const auto* v = std::get_if<Vector>(&u);
    if (v == nullptr || v->size() != spec.input_dimension()) throw InputError("invalid vector input");
    return *v;
}

SequenceBatch to_sequences(const TrajectoryBatch& batch, const SystemSpec& spec) {
    SequenceBatch out;
    out.sequences.reserve(batch.size());
    for (const Trajectory& traj : batch.trajectories) {
        if (traj.states.size() != traj.inputs.size() + 1) throw InputError("trajectory has inconsistent lengths");
        Sequence seq;
        seq.initial_state = traj.states.front();
        seq.inputs.reserve(traj.horizon());
        seq.targets.reserve(traj.horizon());
        for (std::size_t t = 0; t < traj.horizon(); ++t) {
            seq.inputs.push_back(network_input(spec, traj.inputs[t]));
            seq.targets.push_back(traj.states[t + 1]);
        }
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

std::string_view to_string(InitPolicy policy) {
    return policy == InitPolicy::teacher ? "teacher" : "stationary";
}

InitPolicy init_policy_from_string(std::string_view name) {
    if (name == "teacher") return InitPolicy::teacher;
    if (name == "stationary") return InitPolicy::stationary;
    throw ConfigurationError(fmt::format("unknown init policy '{}'", name));
}

Vector stationary_state(const SequenceBatch& batch) {
    if (batch.empty()) throw InputError("empty batch");
    std::vector<Vector> sums;
    for (const Sequence& seq : batch.sequences) {
        if (seq.targets.empty()) continue;
        Vector s = Vector::Zero(seq.targets.front().size());
        for (const Vector& x : seq.targets) s += x;
        sums.push_back(std::move(s));
    }
    if (sums.empty()) throw InputError("batch has no target states");
    std::size_t count = 0;
    for (const Sequence& seq : batch.sequences) count += seq.targets.size();
    const Vector total = pairwise_reduce(std::span<const Vector>(sums), [](const Vector& a, const Vector& b) {
        return Vector(a + b);
    });
    return total / static_cast<double>(count);
}

NetworkState initial_network_state(const Network& net, const Vector& x0) {
    if (net.topology.feedback != FeedbackKind::memory_bank) return state_from_output(net, x0);
    const Index dx = net.topology.output_dimension();
    if (x0.size() != dx) throw SizeError("initial state does not match the output width");
    Vector h = -net.memory_offset;
    h(0) = 0.0;
    h.segment(1, dx) = x0 - net.memory_offset.segment(1, dx);
    return {h};
}

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigurationError(fmt::format("unknown optimizer '{}'", name));
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigurationError("learning rate must be positive");
    if (batch_size == 0) throw ConfigurationError("batch size must be positive");
    if (epochs == 0) throw ConfigurationError("epochs must be positive");
    if (truncation && *truncation == 0) throw ConfigurationError("truncation length must be positive");
    if (gradient_clip && !(*gradient_clip > 0.0)) throw ConfigurationError("gradient clip must be positive");
    if (optimizer == OptimizerKind::adam) {
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ConfigurationError("adam betas must lie in [0, 1)");
        if (!(adam.epsilon > 0.0)) throw ConfigurationError("adam epsilon must be positive");
    }
}

NetworkGradient NetworkGradient::zeros_like(const Network& net) {
    NetworkGradient g;
    for (const AffineLayer& layer : net.layers)
        g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
    for (const Matrix& phi : net.feedback) g.feedback.push_back(Matrix::Zero(phi.rows(), phi.cols()));
    return g;
}

NetworkGradient& NetworkGradient::operator+=(const NetworkGradient& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += other.layers[l].weight;
        layers[l].bias += other.layers[l].bias;
    }
    for (std::size_t f = 0; f < feedback.size(); ++f) feedback[f] += other.feedback[f];
    return *this;
}

std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for (const AffineLayer& layer : net.layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    for (const Matrix& phi : net.feedback) n += static_cast<std::size_t>(phi.size());
    return n;
}

namespace {

template <typename Layers, typename Feedback>
Vector flatten(const Layers& layers, const Feedback& feedback, std::size_t count) {
    Vector out(static_cast<Index>(count));
    Index pos = 0;
    auto put = [&](const auto& m) {
        out.segment(pos, m.size()) = m.reshaped();
        pos += m.size();
    };
    for (const AffineLayer& layer : layers) {
        put(layer.weight);
        put(layer.bias);
    }
    for (const Matrix& phi : feedback) put(phi);
    return out;
}

} // namespace

Vector flatten_parameters(const Network& net) {
    return flatten(net.layers, net.feedback, parameter_count(net));
}

Vector flatten_gradient(const NetworkGradient& gradient) {
    std::size_t count = 0;
    for (const AffineLayer& layer : gradient.layers)
        count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    for (const Matrix& phi : gradient.feedback) count += static_cast<std::size_t>(phi.size());
    return flatten(gradient.layers, gradient.feedback, count);
}

void assign_parameters(Network& net, const Vector& params) {
    if (static_cast<std::size_t>(params.size()) != parameter_count(net))
        throw SizeError("parameter vector has the wrong length");
    Index pos = 0;
    auto take = [&](auto& m) {
        m.reshaped() = params.segment(pos, m.size());
        pos += m.size();
    };
    for (AffineLayer& layer : net.layers) {
        take(layer.weight);
        take(layer.bias);
    }
    for (Matrix& phi : net.feedback) take(phi);
}

namespace {

constexpr std::size_t kChunk = 8;

using SequenceRefs = std::span<const Sequence* const>;

std::vector<const Sequence*> refs(const std::vector<Sequence>& sequences) {
    std::vector<const Sequence*> out;
    out.reserve(sequences.size());
    for (const Sequence& seq : sequences) out.push_back(&seq);
    return out;
}

void check_batch(const Network& net, SequenceRefs sequences) {
    if (sequences.empty()) throw InputError("empty batch");
    const Topology& topo = net.topology;
    for (const Sequence* ptr : sequences) {
        const Sequence& seq = *ptr;
        if (seq.inputs.size() != seq.targets.size()) throw InputError("sequence inputs and targets differ in length");
        if (seq.initial_state.size() != topo.output_dimension())
            throw InputError("sequence initial state does not match the network output");
        for (const Vector& u : seq.inputs)
            if (u.size() != topo.input_dimension()) throw InputError("sequence input does not match the network");
        for (const Vector& x : seq.targets)
            if (x.size() != topo.output_dimension()) throw InputError("sequence target does not match the network");
    }
}

std::size_t total_steps(SequenceRefs sequences) {
    std::size_t steps = 0;
    for (const Sequence* seq : sequences) steps += seq->targets.size();
    if (steps == 0) throw InputError("batch has no time steps");
    return steps;
}

double sequence_loss(const Network& net, NetworkRunner& runner, const Sequence& seq) {
    Vector state = initial_network_state(net, seq.initial_state).feedback;
    double sum = 0.0;
    for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
        const Vector& out = runner.step(state, seq.inputs[t]);
        sum += (out - seq.targets[t]).squaredNorm();
    }
    return sum;
}

/// Adds the gradient of scale·Σ_t ‖x̂_t − x_t‖² for one sequence; returns the
/// unscaled squared-error sum.
double sequence_gradient(const Network& net, const Sequence& seq, double scale,
                         std::optional<std::size_t> truncation, std::vector<detail::StepTrace>& traces,
                         NetworkGradient& grad) {
    const Topology& topo = net.topology;
    const std::size_t L = topo.layer_count();
    const std::size_t T = seq.inputs.size();
    while (traces.size() < T) traces.emplace_back(topo);

    double sum = 0.0;
    Vector state = initial_network_state(net, seq.initial_state).feedback;
    for (std::size_t t = 0; t < T; ++t) {
        detail::StepTrace& tr = traces[t];
        tr.layer_input[0] = seq.inputs[t];
        tr.state_prev = state;
        detail::forward_trace(net, tr);
        if (!tr.output.allFinite()) throw NumericError("non-finite network output during training");
        sum += (tr.output - seq.targets[t]).squaredNorm();
        state = tr.state_next;
    }

    std::vector<Vector> g_act(L);  // gradient w.r.t. layer_input[l], l >= 1
    for (std::size_t l = 1; l < L; ++l) g_act[l].resize(topo.widths[l]);
    Vector g_out(topo.output_dimension());
    Vector g_state = Vector::Zero(topo.state_dimension());
    Vector g_prev(topo.state_dimension());
    Vector g_z;

    for (std::size_t t = T; t-- > 0;) {
        const detail::StepTrace& tr = traces[t];
        if (truncation && (t + 1) % *truncation == 0) g_state.setZero();

        g_out = (2.0 * scale) * (tr.output - seq.targets[t]);
        for (std::size_t l = 1; l < L; ++l) g_act[l].setZero();
        switch (topo.feedback) {
        case FeedbackKind::last_layer: g_out += g_state; break;
        case FeedbackKind::memory_bank: g_act[1] += g_state; break;
        case FeedbackKind::general: {
            Index offset = 0;
            for (std::size_t l = 1; l < L; ++l) {
                g_act[l] += g_state.segment(offset, topo.widths[l]);
                offset += topo.widths[l];
            }
            g_out += g_state.tail(g_out.size());
            break;
        }
        }

        AffineLayer& d_last = grad.layers[L - 1];
        detail::outer_add(d_last.weight, g_out.data(), tr.layer_input[L - 1].data());
        d_last.bias += g_out;
        detail::matvec_transpose_add(net.layers[L - 1].weight, g_out.data(), g_act[L - 1].data());

        g_prev.setZero();
        for (std::size_t l = L - 1; l-- > 0;) {
            const Vector& z = tr.pre[l];
            g_z.resize(z.size());
            for (Index i = 0; i < z.size(); ++i) g_z(i) = z(i) > 0.0 ? g_act[l + 1](i) : 0.0;
            detail::outer_add(grad.layers[l].weight, g_z.data(), tr.layer_input[l].data());
            grad.layers[l].bias += g_z;
            if (detail::has_feedback(topo, l)) {
                const std::size_t f = topo.feedback == FeedbackKind::general ? l : 0;
                detail::outer_add(grad.feedback[f], g_z.data(), tr.state_prev.data());
                detail::matvec_transpose_add(net.feedback[f], g_z.data(), g_prev.data());
            }
            if (l > 0) detail::matvec_transpose_add(net.layers[l].weight, g_z.data(), g_act[l].data());
        }
        g_state.swap(g_prev);
    }
    return sum;
}

struct ChunkResult {
    double sum = 0.0;
    NetworkGradient gradient;
};

LossAndGradient batch_gradient(const Network& net, SequenceRefs sequences,
                               std::optional<std::size_t> truncation, unsigned threads) {
    check_batch(net, sequences);
    const double scale = 1.0 / static_cast<double>(total_steps(sequences));
    const std::size_t chunks = (sequences.size() + kChunk - 1) / kChunk;
    std::vector<ChunkResult> results(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        ChunkResult& r = results[c];
        r.gradient = NetworkGradient::zeros_like(net);
        std::vector<detail::StepTrace> traces;
        const std::size_t end = std::min(sequences.size(), (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i)
            r.sum += sequence_gradient(net, *sequences[i], scale, truncation, traces, r.gradient);
    });
    const ChunkResult total = pairwise_reduce(std::span<const ChunkResult>(results), [](ChunkResult a, const ChunkResult& b) {
        a.sum += b.sum;
        a.gradient += b.gradient;
        return a;
    });
    return {total.sum * scale, total.gradient};
}

} // namespace

double mse_loss(const Network& net, const SequenceBatch& batch, unsigned threads) {
    const std::vector<const Sequence*> sequences = refs(batch.sequences);
    check_batch(net, sequences);
    const double scale = 1.0 / static_cast<double>(total_steps(sequences));
    const std::size_t chunks = (sequences.size() + kChunk - 1) / kChunk;
    std::vector<double> sums(chunks, 0.0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        NetworkRunner runner(net);
        const std::size_t end = std::min(sequences.size(), (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) sums[c] += sequence_loss(net, runner, *sequences[i]);
    });
    return pairwise_sum(sums) * scale;
}

LossAndGradient bptt_gradient(const Network& net, const SequenceBatch& batch, std::optional<std::size_t> truncation,
                              unsigned threads) {
    net.validate();
    if (truncation && *truncation == 0) throw ConfigurationError("truncation length must be positive");
    return batch_gradient(net, refs(batch.sequences), truncation, threads);
}

namespace {

class Optimizer {
public:
    Optimizer(const TrainConfig& config, std::size_t size) : config_(config) {
        if (config.optimizer == OptimizerKind::adam) {
            m_ = Vector::Zero(static_cast<Index>(size));
            v_ = Vector::Zero(static_cast<Index>(size));
        }
    }

    void apply(Vector& params, const Vector& grad) {
        const double lr = config_.learning_rate;
        if (config_.optimizer == OptimizerKind::sgd) {
            params -= lr * grad;
            return;
        }
        const AdamParameters& a = config_.adam;
        ++step_;
        m_ = a.beta1 * m_ + (1.0 - a.beta1) * grad;
        v_ = a.beta2 * v_ + (1.0 - a.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step_));
        for (Index i = 0; i < params.size(); ++i) {
            const double m_hat = m_(i) / c1;
            const double v_hat = v_(i) / c2;
            params(i) -= lr * m_hat / (std::sqrt(v_hat) + a.epsilon);
        }
    }

private:
    const TrainConfig& config_;
    Vector m_;
    Vector v_;
    std::uint64_t step_ = 0;
};

// Entries of the flattened parameter vector that training must not touch.
std::vector<bool> frozen_mask(const Network& net) {
    std::vector<bool> mask(parameter_count(net), false);
    if (net.topology.feedback != FeedbackKind::memory_bank) return mask;
    const std::size_t first = static_cast<std::size_t>(net.layers[0].weight.size() + net.layers[0].bias.size());
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(first), true);
    std::fill(mask.end() - static_cast<std::ptrdiff_t>(net.feedback[0].size()), mask.end(), true);
    return mask;
}

} // namespace

TrainReport train(const SequenceBatch& data, const Topology& topology, const TrainConfig& config) {
    config.validate();
    Pcg32 rng(derive_seed(config.seed, seed_purpose::init));
    return train(data, init_network(topology, rng), config);
}

TrainReport train(const SequenceBatch& data, Network initial, const TrainConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    initial.validate();
    check_batch(initial, refs(data.sequences));
    if (config.truncation) {
        for (const Sequence& seq : data.sequences)
            if (*config.truncation > seq.inputs.size())
                throw ConfigurationError("truncation length exceeds the training horizon");
    }

    TrainReport report;
    report.init = config.init;
    std::vector<Sequence> sequences = data.sequences;
    if (config.init == InitPolicy::stationary) {
        const Vector start_state = stationary_state(data);
        for (Sequence& seq : sequences) seq.initial_state = start_state;
        report.stationary_start = start_state;
    }

    Network net = std::move(initial);
    Vector params = flatten_parameters(net);
    const std::vector<bool> frozen = frozen_mask(net);
    Optimizer optimizer(config, static_cast<std::size_t>(params.size()));
    Pcg32 shuffle_rng(derive_seed(config.seed, seed_purpose::shuffle));

    std::vector<std::size_t> order(sequences.size());
    std::vector<const Sequence*> minibatch;
    const std::size_t batch = std::min(config.batch_size, sequences.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
            std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }
        std::vector<double> losses;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(order.size(), begin + batch);
            minibatch.clear();
            for (std::size_t i = begin; i < end; ++i) minibatch.push_back(&sequences[order[i]]);
            LossAndGradient lg = batch_gradient(net, minibatch, config.truncation, config.threads);
            if (!std::isfinite(lg.loss) || lg.loss > 1e12)
                throw DivergenceError(fmt::format("training diverged in epoch {} (loss {})", epoch + 1, lg.loss));
            losses.push_back(lg.loss);

            Vector grad = flatten_gradient(lg.gradient);
            for (Index i = 0; i < grad.size(); ++i)
                if (frozen[static_cast<std::size_t>(i)]) grad(i) = 0.0;
            if (config.gradient_clip) {
                const double norm = grad.norm();
                if (norm > *config.gradient_clip) grad *= *config.gradient_clip / norm;
            }
            optimizer.apply(params, grad);
            if (!params.allFinite()) throw DivergenceError("parameters became non-finite");
            assign_parameters(net, params);
        }
        report.loss_history.push_back(pairwise_sum(losses) / static_cast<double>(losses.size()));
    }

    report.network = std::move(net);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace rdsrnn
