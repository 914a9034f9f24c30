#pragma once

#include "rdsrnn/linalg.hpp"
#include "rdsrnn/parallel.hpp"
#include "rdsrnn/system.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdsrnn {

/// Per-time-step p-th-moment error E[‖X̂_t − X_t‖^p]^{1/p} over a batch.
struct ErrorCurve {
    std::vector<double> values;  // values[t-1] for t = 1..T
    double p = 2.0;
    std::size_t samples = 0;
    std::string label;
    std::optional<double> delta;
    std::optional<double> alpha;

    std::size_t horizon() const { return values.size(); }
    double at(std::size_t t) const { return values.at(t - 1); }
};

/// Running per-step sums of ‖e_t‖^p.
class ErrorAccumulator {
public:
    ErrorAccumulator(std::size_t horizon, double p);

    /// errors[t-1] = ‖X̂_t − X_t‖ for one path.
    void add_path(std::span<const double> errors);
    void merge(const ErrorAccumulator& other);
    ErrorCurve finish() const;

    std::size_t horizon() const { return sums_.size(); }
    double p() const { return p_; }

private:
    std::vector<double> sums_;
    double p_;
    std::size_t samples_ = 0;
};

/// Error curve over `count` paths. path(n, errors) fills the error norms of
/// path n. Paths are processed in fixed chunks whose sums are combined
/// pairwise, so the result does not depend on the thread count.
ErrorCurve accumulate_error_curve(std::size_t count, std::size_t horizon, double p, unsigned threads,
                                  const std::function<void(std::size_t, std::span<double>)>& path);

/// As accumulate_error_curve for several curves filled by one pass:
/// path(n, errors) fills errors[c] for curve c.
std::vector<ErrorCurve> accumulate_error_curves(
    std::size_t count, std::size_t horizon, std::size_t curves, double p, unsigned threads,
    const std::function<void(std::size_t, std::span<std::vector<double>>)>& path);

/// Coupled error between two aligned batches (same seeds, streams,
/// horizons and dimensions).
ErrorCurve compute_error_curve(const TrajectoryBatch& reference, const TrajectoryBatch& approx, double p = 2.0);

/// Mean of the curve over t in [first, last], inclusive.
double window_mean(const ErrorCurve& curve, std::size_t first, std::size_t last);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares line through (t, y_t) for t in [first, last].
LineFit least_squares_fit(std::span<const double> values_from_t1, std::size_t first, std::size_t last);

/// Least-squares slope of the curve against t over [first, last].
double curve_slope(const ErrorCurve& curve, std::size_t first, std::size_t last);

/// Least-squares slope of log(curve) against t over [first, last].
double log_curve_slope(const ErrorCurve& curve, std::size_t first, std::size_t last);

/// FNV-1a over the bit patterns of the values fed to it.
class Checksum {
public:
    void add(std::uint64_t word);
    void add(double value);
    void add(const Vector& v);
    void add(const Input& u);
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Checksum of every realised input of a batch, in order.
std::uint64_t input_checksum(const TrajectoryBatch& batch);

} // namespace rdsrnn
