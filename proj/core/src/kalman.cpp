#include "rdsrnn/kalman.hpp"

#include "rdsrnn/error.hpp"
#include "rdsrnn/parallel.hpp"

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include <algorithm>

namespace rdsrnn {

namespace {

void check_square(const Matrix& m, Index n, const char* what) {
    if (m.rows() != n || m.cols() != n)
        throw ConfigurationError(fmt::format("{} must be {}x{}, got {}x{}", what, n, n, m.rows(), m.cols()));
    if (!m.allFinite()) throw ConfigurationError(fmt::format("{} is not finite", what));
}

void check_symmetric_psd(const Matrix& m, const char* what) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigurationError(fmt::format("{} must be symmetric", what));
    psd_factor(m);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix predicted_covariance(const LgssmModel& model, const Matrix& covariance) {
    return model.g * covariance * model.g.transpose() + model.q;
}

struct GainTerms {
    Matrix predicted;
    Matrix gain;
};

GainTerms gain_terms(const LgssmModel& model, const Matrix& covariance) {
    GainTerms out;
    out.predicted = symmetrize(predicted_covariance(model, covariance));
    const Matrix hp = model.h * out.predicted;
    const Matrix s = symmetrize(hp * model.h.transpose() + model.r);
    const Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success || !s.allFinite())
        throw ModelError("innovation covariance H P Hᵀ + R is not positive definite");
    out.gain = llt.solve(hp).transpose();
    return out;
}

} // namespace

void LgssmModel::validate() const {
    const Index dz = g.rows();
    if (dz == 0) throw ConfigurationError("signal dimension must be positive");
    check_square(g, dz, "G");
    if (h.cols() != dz || h.rows() == 0) throw ConfigurationError("H must have d_z columns and at least one row");
    if (!h.allFinite()) throw ConfigurationError("H is not finite");
    check_square(q, dz, "Q");
    check_square(r, h.rows(), "R");
    check_square(cov0, dz, "C0");
    if (mean0.size() != dz || !mean0.allFinite()) throw ConfigurationError("initial mean has the wrong length");
    check_symmetric_psd(q, "Q");
    check_symmetric_psd(r, "R");
    check_symmetric_psd(cov0, "C0");
}

Matrix kalman_gain(const LgssmModel& model, const Matrix& covariance) {
    return gain_terms(model, covariance).gain;
}

FilterState kalman_step(const LgssmModel& model, const FilterState& state, const Vector& u,
                        const KalmanOptions& options) {
    const Index dz = model.signal_dimension();
    if (state.mean.size() != dz || state.covariance.rows() != dz || state.covariance.cols() != dz)
        throw InputError("filter state does not match the model");
    if (u.size() != model.observation_dimension()) throw InputError("observation has the wrong length");
    if (!u.allFinite()) throw NumericError("non-finite observation");

    const GainTerms terms = gain_terms(model, state.covariance);
    const Matrix& k = terms.gain;
    const Vector predicted_mean = model.g * state.mean;

    FilterState next;
    next.mean = predicted_mean + k * (u - model.h * predicted_mean);
    const Matrix i_kh = Matrix::Identity(dz, dz) - k * model.h;
    if (options.joseph)
        next.covariance = i_kh * terms.predicted * i_kh.transpose() + k * model.r * k.transpose();
    else
        next.covariance = i_kh * terms.predicted;
    next.covariance = symmetrize(next.covariance);
    return next;
}

FilterState initial_filter_state(const LgssmModel& model) { return {model.mean0, model.cov0}; }

LgssmTrajectory simulate_lgssm(const LgssmModel& model, std::size_t horizon, std::uint64_t seed,
                               std::uint64_t stream) {
    model.validate();
    if (horizon == 0) throw ConfigurationError("horizon must be at least 1");
    const Matrix l0 = psd_factor(model.cov0);
    const Matrix lq = psd_factor(model.q);
    const Matrix lr = psd_factor(model.r);
    Pcg32 rng(seed, stream);
    auto gaussian = [&rng](const Matrix& factor) {
        Vector z(factor.cols());
        for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
        return Vector(factor * z);
    };

    LgssmTrajectory out;
    out.signal.reserve(horizon + 1);
    out.observations.reserve(horizon);
    out.signal.push_back(model.mean0 + gaussian(l0));
    for (std::size_t t = 1; t <= horizon; ++t) {
        Vector z = model.g * out.signal.back() + gaussian(lq);
        out.observations.push_back(model.h * z + gaussian(lr));
        out.signal.push_back(std::move(z));
    }
    return out;
}

Matrix riccati_fixed_point(const LgssmModel& model, double tol, std::size_t max_iterations) {
    model.validate();
    if (!(tol > 0.0)) throw ConfigurationError("tolerance must be positive");
    if (spectral_radius(model.g) >= 1.0) throw ConfigurationError("G must have spectral radius below one");
    const Index dz = model.signal_dimension();
    Matrix c = model.cov0;
    for (std::size_t n = 0; n < max_iterations; ++n) {
        const GainTerms terms = gain_terms(model, c);
        Matrix next = symmetrize((Matrix::Identity(dz, dz) - terms.gain * model.h) * terms.predicted);
        const double change = spectral_norm(next - c);
        c = std::move(next);
        if (change < tol) return c;
    }
    throw ConvergenceError(fmt::format("covariance recursion did not converge in {} iterations", max_iterations));
}

Index encoded_dimension(Index signal_dimension) {
    return signal_dimension + signal_dimension * (signal_dimension + 1) / 2;
}

Vector encode_filter_state(const FilterState& state) {
    const Index dz = state.mean.size();
    if (state.covariance.rows() != dz || state.covariance.cols() != dz)
        throw InputError("covariance does not match the mean");
    Vector out(encoded_dimension(dz));
    out.head(dz) = state.mean;
    Index pos = dz;
    for (Index i = 0; i < dz; ++i)
        for (Index j = i; j < dz; ++j) out(pos++) = state.covariance(i, j);
    return out;
}

FilterState decode_filter_state(const Vector& encoded, Index signal_dimension) {
    const Index dz = signal_dimension;
    if (dz <= 0 || encoded.size() != encoded_dimension(dz))
        throw InputError(fmt::format("encoded filter state has length {}, expected {}", encoded.size(),
                                     encoded_dimension(std::max<Index>(dz, 0))));
    FilterState state;
    state.mean = encoded.head(dz);
    state.covariance.resize(dz, dz);
    Index pos = dz;
    for (Index i = 0; i < dz; ++i) {
        for (Index j = i; j < dz; ++j) {
            state.covariance(i, j) = encoded(pos);
            state.covariance(j, i) = encoded(pos);
            ++pos;
        }
    }
    return state;
}

FilterPath run_filter(const LgssmModel& model, std::size_t horizon, std::uint64_t seed, std::uint64_t stream,
                      const KalmanOptions& options) {
    FilterPath path;
    path.data = simulate_lgssm(model, horizon, seed, stream);
    path.states.reserve(horizon + 1);
    path.states.push_back(initial_filter_state(model));
    for (const Vector& u : path.data.observations) path.states.push_back(kalman_step(model, path.states.back(), u, options));
    return path;
}

SequenceBatch filter_sequences(const LgssmModel& model, std::size_t horizon, std::uint64_t seed, std::size_t count,
                               unsigned threads) {
    model.validate();
    SequenceBatch batch;
    batch.sequences.resize(count);
    parallel_for(count, threads, [&](std::size_t n) {
        const FilterPath path = run_filter(model, horizon, seed, n);
        Sequence& seq = batch.sequences[n];
        seq.initial_state = encode_filter_state(path.states.front());
        seq.inputs = path.data.observations;
        seq.targets.reserve(horizon);
        for (std::size_t t = 1; t <= horizon; ++t) seq.targets.push_back(encode_filter_state(path.states[t]));
    });
    return batch;
}

} // namespace rdsrnn
