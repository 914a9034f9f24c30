#pragma once

#include "rdsrnn/linalg.hpp"
#include "rdsrnn/random.hpp"
#include "rdsrnn/train.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rdsrnn {

/// Z_t = G Z_{t-1} + E_t,  U_t = H Z_t + D_t,
/// E_t ~ N(0, Q), D_t ~ N(0, R), Z_0 ~ N(mean0, cov0).
struct LgssmModel {
    Matrix g;
    Matrix h;
    Matrix q;
    Matrix r;
    Vector mean0;
    Matrix cov0;

    Index signal_dimension() const { return g.rows(); }
    Index observation_dimension() const { return h.rows(); }
    /// Shapes, symmetry and PSD-ness of Q, R and cov0. R may be singular;
    /// a usable filter additionally needs H P Hᵀ + R to be PD.
    void validate() const;
};

struct FilterState {
    Vector mean;
    Matrix covariance;
};

struct KalmanOptions {
    /// Joseph-form covariance update instead of (I − K H) P.
    bool joseph = false;
};

/// K = P Hᵀ (H P Hᵀ + R)^{-1} with P = G C Gᵀ + Q, via a Cholesky solve.
Matrix kalman_gain(const LgssmModel& model, const Matrix& covariance);

FilterState kalman_step(const LgssmModel& model, const FilterState& state, const Vector& u,
                        const KalmanOptions& options = {});

/// Initial filter state (mean0, cov0).
FilterState initial_filter_state(const LgssmModel& model);

struct LgssmTrajectory {
    std::vector<Vector> signal;        // Z_0..Z_T
    std::vector<Vector> observations;  // U_1..U_T
};

LgssmTrajectory simulate_lgssm(const LgssmModel& model, std::size_t horizon, std::uint64_t seed,
                               std::uint64_t stream = 0);

/// Iterates the covariance recursion from cov0 until successive iterates
/// differ by less than tol in spectral norm.
Matrix riccati_fixed_point(const LgssmModel& model, double tol, std::size_t max_iterations = 1'000'000);

/// Mean followed by the upper triangle of the covariance, row-major.
Vector encode_filter_state(const FilterState& state);
FilterState decode_filter_state(const Vector& encoded, Index signal_dimension);
Index encoded_dimension(Index signal_dimension);

/// Filter run along a simulated path.
struct FilterPath {
    LgssmTrajectory data;
    std::vector<FilterState> states;  // t = 0..T
};

FilterPath run_filter(const LgssmModel& model, std::size_t horizon, std::uint64_t seed, std::uint64_t stream = 0,
                      const KalmanOptions& options = {});

/// Training sequences: inputs are observations, targets are encoded
/// filter states, the initial state is the encoded initial filter state.
SequenceBatch filter_sequences(const LgssmModel& model, std::size_t horizon, std::uint64_t seed, std::size_t count,
                               unsigned threads = 1);

} // namespace rdsrnn
