#include "rdsrnn/metrics.hpp"

#include "rdsrnn/error.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>

namespace rdsrnn {

ErrorAccumulator::ErrorAccumulator(std::size_t horizon, double p) : sums_(horizon, 0.0), p_(p) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ConfigurationError("moment order p must be positive");
}

void ErrorAccumulator::add_path(std::span<const double> errors) {
    if (errors.size() != sums_.size()) throw InputError("error path has the wrong horizon");
    if (p_ == 2.0) {
        for (std::size_t t = 0; t < errors.size(); ++t) sums_[t] += errors[t] * errors[t];
    } else {
        for (std::size_t t = 0; t < errors.size(); ++t) sums_[t] += std::pow(errors[t], p_);
    }
    ++samples_;
}

void ErrorAccumulator::merge(const ErrorAccumulator& other) {
    if (other.sums_.size() != sums_.size() || other.p_ != p_) throw InputError("accumulators do not match");
    for (std::size_t t = 0; t < sums_.size(); ++t) sums_[t] += other.sums_[t];
    samples_ += other.samples_;
}

ErrorCurve ErrorAccumulator::finish() const {
    if (samples_ == 0) throw InputError("no paths accumulated");
    ErrorCurve curve;
    curve.p = p_;
    curve.samples = samples_;
    curve.values.resize(sums_.size());
    const double n = static_cast<double>(samples_);
    for (std::size_t t = 0; t < sums_.size(); ++t) {
        const double mean = sums_[t] / n;
        curve.values[t] = p_ == 2.0 ? std::sqrt(mean) : std::pow(mean, 1.0 / p_);
    }
    return curve;
}

std::vector<ErrorCurve> accumulate_error_curves(
    std::size_t count, std::size_t horizon, std::size_t curves, double p, unsigned threads,
    const std::function<void(std::size_t, std::span<std::vector<double>>)>& path) {
    if (count == 0) throw InputError("no paths to evaluate");
    if (curves == 0) throw InputError("no curves requested");
    constexpr std::size_t chunk = 64;
    const std::size_t chunks = (count + chunk - 1) / chunk;
    using Parts = std::vector<ErrorAccumulator>;
    std::vector<Parts> parts(chunks, Parts(curves, ErrorAccumulator(horizon, p)));
    parallel_for(chunks, threads, [&](std::size_t c) {
        std::vector<std::vector<double>> errors(curves, std::vector<double>(horizon));
        const std::size_t end = std::min(count, (c + 1) * chunk);
        for (std::size_t n = c * chunk; n < end; ++n) {
            path(n, errors);
            for (std::size_t k = 0; k < curves; ++k) parts[c][k].add_path(errors[k]);
        }
    });
    const Parts total = pairwise_reduce(std::span<const Parts>(parts), [](Parts a, const Parts& b) {
        for (std::size_t k = 0; k < a.size(); ++k) a[k].merge(b[k]);
        return a;
    });
    std::vector<ErrorCurve> out;
    for (const ErrorAccumulator& acc : total) out.push_back(acc.finish());
    return out;
}

ErrorCurve accumulate_error_curve(std::size_t count, std::size_t horizon, double p, unsigned threads,
                                  const std::function<void(std::size_t, std::span<double>)>& path) {
    return accumulate_error_curves(count, horizon, 1, p, threads,
                                   [&](std::size_t n, std::span<std::vector<double>> errors) {
                                       path(n, errors[0]);
                                   })
        .front();
}

ErrorCurve compute_error_curve(const TrajectoryBatch& reference, const TrajectoryBatch& approx, double p) {
    if (reference.empty()) throw InputError("reference batch is empty");
    if (reference.size() != approx.size()) throw InputError("batches differ in size");
    const std::size_t horizon = reference.trajectories.front().horizon();
    for (std::size_t n = 0; n < reference.size(); ++n) {
        const Trajectory& a = reference.trajectories[n];
        const Trajectory& b = approx.trajectories[n];
        if (a.seed != b.seed || a.stream != b.stream)
            throw InputError(fmt::format("trajectory {} is not coupled (seed/stream differ)", n));
        if (a.horizon() != horizon || b.horizon() != horizon || a.states.size() != horizon + 1 ||
            b.states.size() != horizon + 1)
            throw InputError(fmt::format("trajectory {} has a different horizon", n));
        for (std::size_t t = 0; t <= horizon; ++t)
            if (a.states[t].size() != b.states[t].size())
                throw InputError(fmt::format("trajectory {} differs in state dimension", n));
    }
    return accumulate_error_curve(reference.size(), horizon, p, 1, [&](std::size_t n, std::span<double> errors) {
        const Trajectory& a = reference.trajectories[n];
        const Trajectory& b = approx.trajectories[n];
        for (std::size_t t = 1; t <= horizon; ++t) errors[t - 1] = (a.states[t] - b.states[t]).norm();
    });
}

namespace {

void check_window(std::size_t size, std::size_t first, std::size_t last) {
    if (first == 0 || first > last || last > size)
        throw InputError(fmt::format("window [{}, {}] is outside 1..{}", first, last, size));
}

} // namespace

double window_mean(const ErrorCurve& curve, std::size_t first, std::size_t last) {
    check_window(curve.horizon(), first, last);
    double sum = 0.0;
    for (std::size_t t = first; t <= last; ++t) sum += curve.at(t);
    return sum / static_cast<double>(last - first + 1);
}

LineFit least_squares_fit(std::span<const double> values_from_t1, std::size_t first, std::size_t last) {
    check_window(values_from_t1.size(), first, last);
    if (last == first) throw InputError("a line fit needs at least two points");
    const double n = static_cast<double>(last - first + 1);
    double mean_t = 0.0;
    double mean_y = 0.0;
    for (std::size_t t = first; t <= last; ++t) {
        mean_t += static_cast<double>(t);
        mean_y += values_from_t1[t - 1];
    }
    mean_t /= n;
    mean_y /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t t = first; t <= last; ++t) {
        const double dt = static_cast<double>(t) - mean_t;
        sxy += dt * (values_from_t1[t - 1] - mean_y);
        sxx += dt * dt;
    }
    const double slope = sxy / sxx;
    return {slope, mean_y - slope * mean_t};
}

double curve_slope(const ErrorCurve& curve, std::size_t first, std::size_t last) {
    return least_squares_fit(curve.values, first, last).slope;
}

double log_curve_slope(const ErrorCurve& curve, std::size_t first, std::size_t last) {
    check_window(curve.horizon(), first, last);
    std::vector<double> logs(curve.horizon(), 0.0);
    for (std::size_t t = first; t <= last; ++t) {
        if (!(curve.at(t) > 0.0)) throw DegenerateInputError("log fit needs positive values");
        logs[t - 1] = std::log(curve.at(t));
    }
    return least_squares_fit(logs, first, last).slope;
}

void Checksum::add(std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
        hash_ ^= (word >> (8 * i)) & 0xffU;
        hash_ *= 0x100000001b3ULL;
    }
}

void Checksum::add(double value) { add(std::bit_cast<std::uint64_t>(value)); }

void Checksum::add(const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) add(v(i));
}

void Checksum::add(const Input& u) {
    if (const auto* index = std::get_if<std::size_t>(&u))
        add(static_cast<std::uint64_t>(*index));
    else
        add(std::get<Vector>(u));
}

std::uint64_t input_checksum(const TrajectoryBatch& batch) {
    Checksum sum;
    for (const Trajectory& traj : batch.trajectories)
        for (const Input& u : traj.inputs) sum.add(u);
    return sum.value();
}

} // namespace rdsrnn
