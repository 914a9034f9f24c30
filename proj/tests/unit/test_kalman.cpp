#include "rdsrnn/error.hpp"
#include "rdsrnn/kalman.hpp"
#include "rdsrnn/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace rdsrnn;

namespace {

Matrix m1(double x) { return Matrix::Constant(1, 1, x); }
Vector v1(double x) { return Vector::Constant(1, x); }

LgssmModel scalar_model(double g = 0.9, double h = 1.0, double q = 1.0, double r = 1.0, double c0 = 1.0) {
    return {m1(g), m1(h), m1(q), m1(r), v1(0.0), m1(c0)};
}

LgssmModel planar_model() {
    LgssmModel m;
    m.g.resize(2, 2);
    m.g << 0.8, 0.3, -0.2, 0.6;
    m.h.resize(1, 2);
    m.h << 1.0, 0.5;
    m.q.resize(2, 2);
    m.q << 1.0, 0.2, 0.2, 0.5;
    m.r = m1(0.7);
    m.mean0 = Vector::Zero(2);
    m.cov0 = Matrix::Identity(2, 2);
    return m;
}

} // namespace

TEST(KalmanStep, HandComputedScalar) {
    const LgssmModel model = scalar_model();
    const FilterState s = kalman_step(model, {v1(0.0), m1(1.0)}, v1(2.0));
    const double k = 1.81 / 2.81;
    EXPECT_NEAR(kalman_gain(model, m1(1.0))(0, 0), k, 1e-15);
    EXPECT_NEAR(s.covariance(0, 0), 1.81 / 2.81, 1e-15);
    EXPECT_NEAR(s.mean(0), k * 2.0, 1e-15);
}

TEST(KalmanStep, NoObservationIsPurePrediction) {
    LgssmModel model = planar_model();
    model.h.setZero();
    Vector mean(2);
    mean << 1.0, -2.0;
    const Matrix c = 0.5 * Matrix::Identity(2, 2);
    const FilterState s = kalman_step(model, {mean, c}, v1(10.0));
    EXPECT_TRUE(kalman_gain(model, c).isZero(0));
    EXPECT_LT((s.mean - model.g * mean).norm(), 1e-15);
    EXPECT_LT((s.covariance - (model.g * c * model.g.transpose() + model.q)).norm(), 1e-15);
}

TEST(KalmanStep, HugeObservationNoiseIgnoresObservation) {
    const LgssmModel model = scalar_model(0.9, 1.0, 1.0, 1e12);
    const FilterState s = kalman_step(model, {v1(1.0), m1(1.0)}, v1(1e3));
    EXPECT_LT(kalman_gain(model, m1(1.0))(0, 0), 1e-11);
    EXPECT_NEAR(s.mean(0), 0.9, 1e-8);
}

TEST(KalmanStep, JosephFormAgrees) {
    const LgssmModel model = planar_model();
    FilterState a = initial_filter_state(model);
    FilterState b = a;
    const LgssmTrajectory data = simulate_lgssm(model, 50, 3);
    for (const Vector& u : data.observations) {
        a = kalman_step(model, a, u);
        b = kalman_step(model, b, u, KalmanOptions{true});
    }
    EXPECT_LT((a.mean - b.mean).norm(), 1e-10);
    EXPECT_LT((a.covariance - b.covariance).norm(), 1e-10);
    EXPECT_EQ(a.covariance, a.covariance.transpose());
}

TEST(KalmanStep, SingularInnovationIsModelError) {
    const LgssmModel model = scalar_model(0.9, 0.0, 1.0, 0.0);
    EXPECT_THROW(kalman_step(model, {v1(0.0), m1(1.0)}, v1(0.0)), ModelError);
}

TEST(KalmanStep, CovarianceIgnoresObservations) {
    const LgssmModel model = planar_model();
    const FilterPath a = run_filter(model, 100, 1);
    const FilterPath b = run_filter(model, 100, 2);
    for (std::size_t t = 0; t <= 100; ++t) ASSERT_EQ(a.states[t].covariance, b.states[t].covariance);
}

TEST(LgssmModel, Validation) {
    LgssmModel model = planar_model();
    EXPECT_NO_THROW(model.validate());
    model.q(0, 1) = 0.3;
    EXPECT_THROW(model.validate(), ConfigurationError);
    model = planar_model();
    model.h.resize(1, 3);
    EXPECT_THROW(model.validate(), ConfigurationError);
}

TEST(SimulateLgssm, Noiseless) {
    LgssmModel model = planar_model();
    model.q.setZero();
    model.r.setZero();
    model.cov0.setZero();
    model.mean0 << 1.0, 2.0;
    const LgssmTrajectory traj = simulate_lgssm(model, 10, 5);
    Vector z = model.mean0;
    EXPECT_EQ(traj.signal[0], z);
    for (std::size_t t = 1; t <= 10; ++t) {
        z = model.g * z;
        EXPECT_LT((traj.signal[t] - z).norm(), 1e-14);
        EXPECT_LT((traj.observations[t - 1] - model.h * z).norm(), 1e-14);
    }
}

TEST(SimulateLgssm, CovarianceFollowsLyapunovRecursion) {
    const LgssmModel model = planar_model();
    const int n = 10000;
    const std::size_t horizon = 6;
    Matrix v = model.cov0;
    for (std::size_t t = 0; t < horizon; ++t) v = model.g * v * model.g.transpose() + model.q;
    Vector mean = Vector::Zero(2);
    Matrix second = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Vector z = simulate_lgssm(model, horizon, 77, static_cast<std::uint64_t>(i)).signal[horizon];
        mean += z;
        second += z * z.transpose();
    }
    mean /= n;
    const Matrix cov = (second - n * mean * mean.transpose()) / (n - 1);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            const double se = std::sqrt((v(i, i) * v(j, j) + v(i, j) * v(i, j)) / (n - 1));
            EXPECT_NEAR(cov(i, j), v(i, j), 4 * se);
        }
}

TEST(SimulateLgssm, ObservationsHaveLagTwoPartialCorrelation) {
    const double stationary = 1.0 / (1.0 - 0.81);
    const LgssmModel model = scalar_model(0.9, 1.0, 1.0, 1.0, stationary);
    const LgssmTrajectory traj = simulate_lgssm(model, 100000, 9);
    std::vector<double> u;
    for (const Vector& x : traj.observations) u.push_back(x(0));
    double mean = 0.0;
    for (double x : u) mean += x;
    mean /= static_cast<double>(u.size());
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < u.size(); ++t) s += (u[t] - mean) * (u[t - lag] - mean);
        return s / static_cast<double>(u.size());
    };
    const double r1 = autocov(1) / autocov(0);
    const double r2 = autocov(2) / autocov(0);
    const double pacf2 = (r2 - r1 * r1) / (1 - r1 * r1);
    // Lag-2 partial correlation of an AR(1) observed in noise is about 0.25.
    // A Markov (AR(1)) sequence has zero, with standard error 1/sqrt(T).
    EXPECT_GT(pacf2, 10.0 / std::sqrt(static_cast<double>(u.size())));
}

TEST(Riccati, ScalarQuadraticRoot) {
    const Matrix c = riccati_fixed_point(scalar_model(), 1e-14);
    const double root = (-1.19 + std::sqrt(1.19 * 1.19 + 4 * 0.81)) / (2 * 0.81);
    EXPECT_NEAR(c(0, 0), root, 1e-12);
    const double k = (0.81 * root + 1) / (0.81 * root + 2);
    EXPECT_NEAR(root, (1 - k) * (0.81 * root + 1), 1e-14);
}

TEST(Riccati, NoProcessNoiseGivesZero) {
    Matrix g(2, 2);
    g << 0.5, 0.1, 0.0, 0.7;
    LgssmModel model{g, Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Identity(2, 2), Vector::Zero(2),
                     Matrix::Zero(2, 2)};
    EXPECT_TRUE(riccati_fixed_point(model, 1e-12).isZero(0));
}

TEST(Riccati, FixedPointIsInvariant) {
    const LgssmModel model = planar_model();
    const double tol = 1e-12;
    const Matrix c = riccati_fixed_point(model, tol);
    const FilterState next = kalman_step(model, {Vector::Zero(2), c}, v1(0.0));
    EXPECT_LT(spectral_norm(next.covariance - c), tol);
}

TEST(Riccati, Errors) {
    EXPECT_THROW(riccati_fixed_point(scalar_model(1.0), 1e-12), ConfigurationError);
    EXPECT_THROW(riccati_fixed_point(scalar_model(), 1e-12, 3), ConvergenceError);
}

TEST(Riccati, GainConvergesGeometrically) {
    const LgssmModel model = planar_model();
    const Matrix c_inf = riccati_fixed_point(model, 1e-15);
    const Matrix k_inf = kalman_gain(model, c_inf);
    Matrix c = model.cov0;
    std::vector<double> logs;
    for (int t = 0; t < 15; ++t) {
        logs.push_back(std::log((kalman_gain(model, c) - k_inf).norm()));
        c = kalman_step(model, {Vector::Zero(2), c}, v1(0.0)).covariance;
    }
    const double n = static_cast<double>(logs.size());
    double mt = 0.0;
    double my = 0.0;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        mt += static_cast<double>(t);
        my += logs[t];
    }
    mt /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        sxy += (static_cast<double>(t) - mt) * (logs[t] - my);
        sxx += (static_cast<double>(t) - mt) * (static_cast<double>(t) - mt);
    }
    EXPECT_LT(std::exp(sxy / sxx), 1.0);
}

TEST(Encoding, Layout) {
    Matrix c(2, 2);
    c << 3.0, 4.0, 4.0, 5.0;
    Vector mean(2);
    mean << 1.0, 2.0;
    const Vector e = encode_filter_state({mean, c});
    Vector expected(5);
    expected << 1, 2, 3, 4, 5;
    EXPECT_EQ(e, expected);
    EXPECT_EQ(encoded_dimension(3), 9);
}

TEST(Encoding, RoundTripIsExact) {
    const LgssmModel model = planar_model();
    const FilterPath path = run_filter(model, 20, 4);
    for (const FilterState& s : path.states) {
        const FilterState back = decode_filter_state(encode_filter_state(s), 2);
        ASSERT_EQ(back.mean, s.mean);
        ASSERT_EQ(back.covariance, s.covariance);
        ASSERT_EQ(back.covariance, back.covariance.transpose());
    }
    EXPECT_THROW(decode_filter_state(Vector::Zero(4), 2), InputError);
}

TEST(FilterOptimality, BeatsFixedSuboptimalGains) {
    const LgssmModel model = planar_model();
    const int runs = 2000;
    const std::size_t horizon = 40;
    const std::vector<double> scales{0.0, 0.5, 2.0};
    std::vector<double> diff_sum(scales.size(), 0.0);
    std::vector<double> diff_sq(scales.size(), 0.0);
    for (int n = 0; n < runs; ++n) {
        const FilterPath path = run_filter(model, horizon, 31, static_cast<std::uint64_t>(n));
        double optimal = 0.0;
        for (std::size_t t = 1; t <= horizon; ++t) optimal += (path.states[t].mean - path.data.signal[t]).squaredNorm();
        for (std::size_t s = 0; s < scales.size(); ++s) {
            Vector mean = model.mean0;
            double error = 0.0;
            for (std::size_t t = 1; t <= horizon; ++t) {
                Matrix k = scales[s] * kalman_gain(model, path.states[t - 1].covariance);
                // Keep the doubled gain inside the stable range of I − K H.
                k = k.cwiseMin(1.0).cwiseMax(-1.0);
                const Vector predicted = model.g * mean;
                mean = predicted + k * (path.data.observations[t - 1] - model.h * predicted);
                error += (mean - path.data.signal[t]).squaredNorm();
            }
            const double d = (error - optimal) / static_cast<double>(horizon);
            diff_sum[s] += d;
            diff_sq[s] += d * d;
        }
    }
    for (std::size_t s = 0; s < scales.size(); ++s) {
        const double mean = diff_sum[s] / runs;
        const double se = std::sqrt((diff_sq[s] / runs - mean * mean) / runs);
        EXPECT_GE(mean, -2 * se) << "gain scale " << scales[s];
    }
}

TEST(FilterSequences, TargetsAreEncodedStates) {
    const LgssmModel model = scalar_model();
    const SequenceBatch batch = filter_sequences(model, 10, 5, 3, 2);
    const FilterPath path = run_filter(model, 10, 5, 2);
    ASSERT_EQ(batch.size(), 3u);
    EXPECT_EQ(batch.sequences[2].initial_state, encode_filter_state(path.states[0]));
    for (std::size_t t = 1; t <= 10; ++t) {
        EXPECT_EQ(batch.sequences[2].targets[t - 1], encode_filter_state(path.states[t]));
        EXPECT_EQ(batch.sequences[2].inputs[t - 1], path.data.observations[t - 1]);
    }
}
