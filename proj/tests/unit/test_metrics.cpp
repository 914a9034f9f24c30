#include "rdsrnn/error.hpp"
#include "rdsrnn/metrics.hpp"
#include "rdsrnn/presets.hpp"
#include "rdsrnn/system.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace rdsrnn;

namespace {

ErrorCurve curve_of(std::vector<double> values) {
    ErrorCurve c;
    c.values = std::move(values);
    return c;
}

} // namespace

TEST(ErrorCurve, IdenticalBatchesGiveZero) {
    const TrajectoryBatch batch = simulate_batch(presets::barnsley_fern_system(), Vector::Zero(2), 30, 1, 5);
    const ErrorCurve curve = compute_error_curve(batch, batch);
    ASSERT_EQ(curve.horizon(), 30u);
    EXPECT_EQ(curve.samples, 5u);
    for (double v : curve.values) EXPECT_EQ(v, 0.0);
}

TEST(ErrorCurve, RootMeanSquare) {
    TrajectoryBatch ref;
    TrajectoryBatch approx;
    for (std::uint64_t n = 0; n < 2; ++n) {
        Trajectory a;
        a.stream = n;
        a.states = {Vector::Zero(1), Vector::Zero(1)};
        a.inputs = {Input{Vector::Zero(1)}};
        Trajectory b = a;
        b.states[1](0) = n == 0 ? 3.0 : 4.0;
        ref.trajectories.push_back(a);
        approx.trajectories.push_back(b);
    }
    EXPECT_NEAR(compute_error_curve(ref, approx).at(1), std::sqrt(12.5), 1e-15);
    EXPECT_NEAR(compute_error_curve(ref, approx, 1.0).at(1), 3.5, 1e-15);
}

TEST(ErrorCurve, MisalignedBatches) {
    const SystemSpec fern = presets::barnsley_fern_system();
    const TrajectoryBatch a = simulate_batch(fern, Vector::Zero(2), 10, 1, 3);
    const TrajectoryBatch fewer = simulate_batch(fern, Vector::Zero(2), 10, 1, 2);
    const TrajectoryBatch other_seed = simulate_batch(fern, Vector::Zero(2), 10, 2, 3);
    const TrajectoryBatch shorter = simulate_batch(fern, Vector::Zero(2), 9, 1, 3);
    EXPECT_THROW(compute_error_curve(a, fewer), InputError);
    EXPECT_THROW(compute_error_curve(a, other_seed), InputError);
    EXPECT_THROW(compute_error_curve(a, shorter), InputError);
    EXPECT_THROW(compute_error_curve(TrajectoryBatch{}, TrajectoryBatch{}), InputError);
}

TEST(Accumulate, ThreadCountDoesNotChangeResult) {
    auto path = [](std::size_t n, std::span<double> errors) {
        Pcg32 rng(3, n);
        for (double& e : errors) e = rng.normal();
    };
    const ErrorCurve a = accumulate_error_curve(1000, 20, 2.0, 1, path);
    const ErrorCurve b = accumulate_error_curve(1000, 20, 2.0, 4, path);
    EXPECT_EQ(a.values, b.values);
}

TEST(Accumulate, MultipleCurves) {
    const auto curves = accumulate_error_curves(10, 3, 2, 2.0, 1, [](std::size_t, std::span<std::vector<double>> e) {
        e[0].assign(3, 1.0);
        e[1].assign(3, 2.0);
    });
    ASSERT_EQ(curves.size(), 2u);
    EXPECT_EQ(curves[0].at(2), 1.0);
    EXPECT_EQ(curves[1].at(3), 2.0);
}

TEST(ErrorAccumulator, Errors) {
    EXPECT_THROW(ErrorAccumulator(5, 0.0), ConfigurationError);
    ErrorAccumulator acc(3, 2.0);
    EXPECT_THROW(acc.finish(), InputError);
    const std::vector<double> wrong(4, 1.0);
    EXPECT_THROW(acc.add_path(wrong), InputError);
}

TEST(Windows, MeanAndSlope) {
    std::vector<double> v;
    for (int t = 1; t <= 100; ++t) v.push_back(2.0 + 0.5 * t);
    const ErrorCurve c = curve_of(v);
    EXPECT_DOUBLE_EQ(window_mean(c, 1, 3), 3.0);
    EXPECT_NEAR(curve_slope(c, 10, 100), 0.5, 1e-12);
    const LineFit fit = least_squares_fit(v, 1, 100);
    EXPECT_NEAR(fit.intercept, 2.0, 1e-10);
    EXPECT_THROW(window_mean(c, 0, 3), InputError);
    EXPECT_THROW(window_mean(c, 5, 101), InputError);
    EXPECT_THROW(curve_slope(c, 4, 4), InputError);
}

TEST(Windows, LogSlope) {
    std::vector<double> v;
    for (int t = 1; t <= 50; ++t) v.push_back(3.0 * std::pow(1.1, t));
    EXPECT_NEAR(log_curve_slope(curve_of(v), 1, 50), std::log(1.1), 1e-12);
    v[10] = 0.0;
    EXPECT_THROW(log_curve_slope(curve_of(v), 1, 50), DegenerateInputError);
}

TEST(Checksum, SensitiveToValuesAndOrder) {
    Checksum a;
    a.add(1.0);
    a.add(2.0);
    Checksum b;
    b.add(2.0);
    b.add(1.0);
    EXPECT_NE(a.value(), b.value());
    Checksum c;
    c.add(1.0);
    c.add(2.0);
    EXPECT_EQ(a.value(), c.value());
    Checksum zero;
    zero.add(0.0);
    Checksum negative_zero;
    negative_zero.add(-0.0);
    EXPECT_NE(zero.value(), negative_zero.value());
}

TEST(Checksum, InputStreams) {
    const SystemSpec fern = presets::barnsley_fern_system();
    const TrajectoryBatch a = simulate_batch(fern, Vector::Zero(2), 50, 1, 3);
    const TrajectoryBatch b = simulate_batch(fern, Vector::Ones(2), 50, 1, 3);
    const TrajectoryBatch c = simulate_batch(fern, Vector::Zero(2), 50, 2, 3);
    EXPECT_EQ(input_checksum(a), input_checksum(b));
    EXPECT_NE(input_checksum(a), input_checksum(c));
}
