#include "rdsrnn/error.hpp"
#include "rdsrnn/presets.hpp"
#include "rdsrnn/rnn.hpp"
#include "rdsrnn/system.hpp"
#include "rdsrnn/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace rdsrnn;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

SequenceBatch fern_batch(std::size_t count, std::size_t horizon, std::uint64_t seed) {
    const SystemSpec spec = presets::simplified_fern_system();
    return to_sequences(simulate_batch(spec, Vector::Zero(2), horizon, seed, count), spec);
}

SequenceBatch ou_batch(double rho, double alpha, std::size_t count, std::size_t horizon, std::uint64_t seed) {
    const SystemSpec spec = presets::ou_system(rho, alpha, 1.0);
    return to_sequences(simulate_batch(spec, scalar(rho), horizon, seed, count), spec);
}

Network perturbed_network(const Topology& topo, Pcg32& rng) {
    Network net = init_network(topo, rng);
    for (AffineLayer& layer : net.layers)
        for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.3 * rng.normal();
    return net;
}

// Central differences of mse_loss in every flattened parameter.
Vector finite_difference_gradient(const Network& net, const SequenceBatch& batch, double h) {
    const Vector params = flatten_parameters(net);
    Vector grad(params.size());
    Network probe = net;
    for (Index i = 0; i < params.size(); ++i) {
        Vector p = params;
        p(i) = params(i) + h;
        assign_parameters(probe, p);
        const double up = mse_loss(probe, batch);
        p(i) = params(i) - h;
        assign_parameters(probe, p);
        const double down = mse_loss(probe, batch);
        grad(i) = (up - down) / (2 * h);
    }
    return grad;
}

double max_relative_error(const Vector& analytic, const Vector& numeric, double floor) {
    double worst = 0.0;
    for (Index i = 0; i < analytic.size(); ++i) {
        const double scale = std::max(std::abs(analytic(i)), std::abs(numeric(i)));
        if (scale <= floor) continue;
        worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / scale);
    }
    return worst;
}

} // namespace

TEST(NetworkInput, OneHotForCategorical) {
    const SystemSpec fern = presets::simplified_fern_system();
    EXPECT_EQ(network_input_dimension(fern), 2);
    const Vector v = network_input(fern, Input{std::size_t{1}});
    EXPECT_EQ(v(0), 0.0);
    EXPECT_EQ(v(1), 1.0);
    EXPECT_THROW(network_input(fern, Input{std::size_t{2}}), InputError);
}

TEST(ToSequences, TeacherLayout) {
    const SystemSpec spec = presets::ou_system(1.0, 0.5, 1.0);
    const TrajectoryBatch batch = simulate_batch(spec, scalar(2.0), 4, 1, 2);
    const SequenceBatch seqs = to_sequences(batch, spec);
    ASSERT_EQ(seqs.size(), 2u);
    EXPECT_EQ(seqs.sequences[0].initial_state, scalar(2.0));
    EXPECT_EQ(seqs.sequences[1].targets[3], batch.trajectories[1].states[4]);
    EXPECT_EQ(seqs.sequences[1].inputs[0], std::get<Vector>(batch.trajectories[1].inputs[0]));
}

TEST(Parameters, FlattenAssignRoundTrip) {
    Pcg32 rng(1);
    Network net = perturbed_network(Topology{{3, 4, 5, 2}, FeedbackKind::general, 0}, rng);
    const Vector p = flatten_parameters(net);
    EXPECT_EQ(static_cast<std::size_t>(p.size()), parameter_count(net));
    Network other = init_network(net.topology, rng);
    assign_parameters(other, p);
    EXPECT_EQ(flatten_parameters(other), p);
    EXPECT_THROW(assign_parameters(other, Vector::Zero(3)), SizeError);
}

TEST(MseLoss, ExactOuNetwork) {
    const SequenceBatch data = ou_batch(20.0, 0.99, 20, 100, 3);
    EXPECT_LT(mse_loss(ou_relu_network(20.0, 0.99, 1e6, 0.0), data), 1e-12);
}

TEST(MseLoss, SingleStepPerturbation) {
    const SequenceBatch data = ou_batch(20.0, 0.0, 50, 1, 4);
    EXPECT_NEAR(mse_loss(ou_relu_network(20.0, 0.0, 1e6, 0.1), data), 0.01, 1e-9);
}

TEST(MseLoss, ConstantZero) {
    Pcg32 rng(2);
    Network net = init_network(Topology{{1, 3, 1}, FeedbackKind::last_layer, 0}, rng);
    for (auto& layer : net.layers) layer.weight.setZero();
    SequenceBatch batch;
    batch.sequences.push_back({scalar(0.0), {scalar(1.0), scalar(-2.0)}, {scalar(0.0), scalar(0.0)}});
    EXPECT_EQ(mse_loss(net, batch), 0.0);
}

TEST(MseLoss, EmptyBatch) {
    EXPECT_THROW(mse_loss(ou_relu_network(0.0, 0.5, 1.0, 0.0), SequenceBatch{}), InputError);
}

TEST(Bptt, MatchesFiniteDifferencesOnSixUnitNet) {
    Pcg32 rng(11);
    const Network net = perturbed_network(Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, rng);
    const SequenceBatch data = fern_batch(5, 10, 12);
    const LossAndGradient lg = bptt_gradient(net, data);
    EXPECT_DOUBLE_EQ(lg.loss, mse_loss(net, data));
    const Vector analytic = flatten_gradient(lg.gradient);
    const Vector numeric = finite_difference_gradient(net, data, 1e-5);
    EXPECT_LT(max_relative_error(analytic, numeric, 1e-6), 1e-4);
}

TEST(Bptt, MatchesFiniteDifferencesOnGeneralNet) {
    Pcg32 rng(12);
    const Network net = perturbed_network(Topology{{2, 5, 4, 2}, FeedbackKind::general, 0}, rng);
    const SequenceBatch data = fern_batch(4, 8, 13);
    const Vector analytic = flatten_gradient(bptt_gradient(net, data).gradient);
    const Vector numeric = finite_difference_gradient(net, data, 1e-5);
    EXPECT_LT(max_relative_error(analytic, numeric, 1e-6), 1e-4);
}

TEST(Bptt, ZeroNetworkZeroTargets) {
    Pcg32 rng(3);
    Network net = init_network(Topology{{2, 4, 2}, FeedbackKind::last_layer, 0}, rng);
    for (auto& layer : net.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    net.feedback[0].setZero();
    SequenceBatch data = fern_batch(3, 5, 2);
    for (Sequence& s : data.sequences)
        for (Vector& x : s.targets) x.setZero();
    const LossAndGradient lg = bptt_gradient(net, data);
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_TRUE(flatten_gradient(lg.gradient).isZero(0));
}

TEST(Bptt, DuplicatedSequencesLeaveGradientUnchanged) {
    Pcg32 rng(4);
    const Network net = perturbed_network(Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, rng);
    const SequenceBatch data = fern_batch(3, 12, 5);
    SequenceBatch doubled;
    for (const Sequence& s : data.sequences) {
        doubled.sequences.push_back(s);
        doubled.sequences.push_back(s);
    }
    const Vector a = flatten_gradient(bptt_gradient(net, data).gradient);
    const Vector b = flatten_gradient(bptt_gradient(net, doubled).gradient);
    EXPECT_LT((a - b).norm(), 1e-13 * a.norm());
}

TEST(Bptt, ThreadCountDoesNotChangeResult) {
    Pcg32 rng(5);
    const Network net = perturbed_network(Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, rng);
    const SequenceBatch data = fern_batch(37, 20, 6);
    const LossAndGradient a = bptt_gradient(net, data, std::nullopt, 1);
    const LossAndGradient b = bptt_gradient(net, data, std::nullopt, 4);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(flatten_gradient(a.gradient), flatten_gradient(b.gradient));
    EXPECT_EQ(mse_loss(net, data, 1), mse_loss(net, data, 3));
}

TEST(Bptt, Truncation) {
    Pcg32 rng(6);
    const Network net = perturbed_network(Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, rng);
    const SequenceBatch data = fern_batch(4, 10, 7);
    const Vector full = flatten_gradient(bptt_gradient(net, data).gradient);
    EXPECT_EQ(flatten_gradient(bptt_gradient(net, data, 10).gradient), full);
    const LossAndGradient cut = bptt_gradient(net, data, 3);
    EXPECT_EQ(cut.loss, mse_loss(net, data));
    EXPECT_GT((flatten_gradient(cut.gradient) - full).norm(), 0.0);
    EXPECT_THROW(bptt_gradient(net, data, 0), ConfigurationError);
}

TEST(Bptt, OneStepTruncationMatchesTeacherForcedDerivative) {
    // With k = 1 no gradient crosses a step, so the feedback input counts
    // as a constant. Compare against finite differences of a loss that
    // freezes the fed-back states at their current values.
    Pcg32 rng(7);
    const Network net = perturbed_network(Topology{{2, 4, 2}, FeedbackKind::last_layer, 0}, rng);
    const SequenceBatch data = fern_batch(2, 6, 8);
    std::vector<std::vector<Vector>> frozen_states;
    for (const Sequence& s : data.sequences) {
        std::vector<Vector> states{s.initial_state};
        for (const Vector& y : rollout(net, {s.initial_state}, s.inputs)) states.push_back(y);
        frozen_states.push_back(states);
    }
    auto frozen_loss = [&](const Network& probe) {
        double sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t n = 0; n < data.size(); ++n)
            for (std::size_t t = 0; t < data.sequences[n].inputs.size(); ++t) {
                const Vector y =
                    forward_step(probe, {frozen_states[n][t]}, data.sequences[n].inputs[t]).output;
                sum += (y - data.sequences[n].targets[t]).squaredNorm();
                ++steps;
            }
        return sum / static_cast<double>(steps);
    };
    const Vector params = flatten_parameters(net);
    Vector numeric(params.size());
    Network probe = net;
    for (Index i = 0; i < params.size(); ++i) {
        Vector p = params;
        p(i) += 1e-5;
        assign_parameters(probe, p);
        const double up = frozen_loss(probe);
        p(i) = params(i) - 1e-5;
        assign_parameters(probe, p);
        numeric(i) = (up - frozen_loss(probe)) / 2e-5;
    }
    const Vector analytic = flatten_gradient(bptt_gradient(net, data, 1).gradient);
    EXPECT_LT(max_relative_error(analytic, numeric, 1e-6), 1e-4);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = TrainConfig{};
    c.truncation = 0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = TrainConfig{};
    c.adam.beta1 = 1.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    EXPECT_THROW(optimizer_from_string("rmsprop"), ConfigurationError);
    EXPECT_THROW(init_policy_from_string("random"), ConfigurationError);
}

TEST(Train, SeededDeterminism) {
    const SequenceBatch data = fern_batch(64, 20, 9);
    TrainConfig c;
    c.epochs = 5;
    c.batch_size = 16;
    c.seed = 42;
    c.learning_rate = 1e-2;
    const Topology topo{{2, 6, 2}, FeedbackKind::last_layer, 0};
    const TrainReport a = train(data, topo, c);
    c.threads = 3;
    const TrainReport b = train(data, topo, c);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(flatten_parameters(a.network), flatten_parameters(b.network));
    for (double loss : a.loss_history) {
        EXPECT_TRUE(std::isfinite(loss));
        EXPECT_GE(loss, 0.0);
    }
}

TEST(Train, LossDecreasesOnFern) {
    const SequenceBatch data = fern_batch(200, 20, 10);
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 20;
    c.learning_rate = 1e-2;
    c.gradient_clip = 1.0;
    const TrainReport r = train(data, Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, c);
    EXPECT_LT(r.loss_history.back(), 0.5 * r.loss_history.front());
}

TEST(Train, MonotoneOnLinearToy) {
    // Large biases keep the ReLU active, so the net is linear in its state.
    const SequenceBatch data = ou_batch(0.0, 0.5, 20, 5, 11);
    Network net = ou_relu_network(0.0, 0.3, 50.0, 0.0);
    net.layers[1].weight(0, 0) = 0.9;
    net.layers[1].bias(0) = -45.0;
    TrainConfig c;
    c.optimizer = OptimizerKind::sgd;
    c.learning_rate = 1e-5;
    c.batch_size = data.size();
    c.epochs = 40;
    const TrainReport r = train(data, net, c);
    for (std::size_t e = 1; e < r.loss_history.size(); ++e) EXPECT_LE(r.loss_history[e], r.loss_history[e - 1]);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, InitialisedAtTruthStaysAtFloor) {
    const SequenceBatch data = ou_batch(0.0, 0.5, 20, 10, 12);
    TrainConfig c;
    c.optimizer = OptimizerKind::sgd;
    c.learning_rate = 1e-3;
    c.epochs = 10;
    const TrainReport r = train(data, ou_relu_network(0.0, 0.5, 100.0, 0.0), c);
    for (double loss : r.loss_history) EXPECT_LT(loss, 1e-24);
}

TEST(Train, StationaryStart) {
    const SequenceBatch data = fern_batch(10, 30, 13);
    TrainConfig c;
    c.epochs = 1;
    c.init = InitPolicy::stationary;
    const TrainReport r = train(data, Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, c);
    ASSERT_TRUE(r.stationary_start.has_value());
    Vector mean = Vector::Zero(2);
    for (const Sequence& s : data.sequences)
        for (const Vector& x : s.targets) mean += x;
    mean /= 300.0;
    EXPECT_LT((*r.stationary_start - mean).norm(), 1e-12);
}

TEST(Train, DivergenceIsReported) {
    SequenceBatch data;
    data.sequences.push_back({scalar(0.0), {scalar(1.0)}, {scalar(1e7)}});
    TrainConfig c;
    c.epochs = 2;
    EXPECT_THROW(train(data, Topology{{1, 2, 1}, FeedbackKind::last_layer, 0}, c), DivergenceError);
}

TEST(Train, TruncationLongerThanHorizon) {
    const SequenceBatch data = fern_batch(4, 5, 14);
    TrainConfig c;
    c.truncation = 6;
    EXPECT_THROW(train(data, Topology{{2, 3, 2}, FeedbackKind::last_layer, 0}, c), ConfigurationError);
}

TEST(Train, MemoryBankFirstLayerIsFrozen) {
    const SystemSpec spec = presets::ou_system(0.0, 0.5, 1.0);
    const SequenceBatch data = to_sequences(simulate_batch(spec, scalar(0.0), 4, 15, 16), spec);
    const MemoryBank bank = build_memory_bank(1, 1, 4, 40.0, scalar(0.0));
    Pcg32 rng(16);
    const std::vector<Index> readout{4};
    const Network net = memory_bank_network(bank, readout, rng);
    EXPECT_EQ(initial_network_state(net, scalar(0.0)).feedback, bank.initial.feedback);
    TrainConfig c;
    c.epochs = 5;
    c.batch_size = 4;
    c.learning_rate = 1e-2;
    const TrainReport r = train(data, net, c);
    EXPECT_EQ(r.network.layers[0].weight, net.layers[0].weight);
    EXPECT_EQ(r.network.layers[0].bias, net.layers[0].bias);
    EXPECT_EQ(r.network.feedback[0], net.feedback[0]);
    EXPECT_NE(r.network.layers[1].weight, net.layers[1].weight);
}
