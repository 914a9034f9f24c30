#pragma once

#include "rdsrnn/system.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <vector>

namespace rdsrnn {

inline constexpr std::uint64_t kMaxEnumeratedSequences = 10'000'000;

/// Upper bound on the k-step p-th moment contraction ratio of a finite
/// affine ensemble: the probability-weighted sum, over every length-k index
/// sequence, of ‖A_{i_k}···A_{i_1}‖^p with ‖·‖ the spectral norm.
/// Throws SizeError when K^k exceeds max_sequences.
double exact_affine_bound(const MapEnsemble& ensemble, std::size_t k, double p,
                          std::uint64_t max_sequences = kMaxEnumeratedSequences);

struct ContractionEstimate {
    double ratio = 0.0;           // mean numerator / mean denominator
    double standard_error = 0.0;  // delta-method error of the ratio
    double numerator_mean = 0.0;
    double denominator_mean = 0.0;
    std::size_t samples = 0;
};

/// Monte-Carlo estimate of
///   E‖F_t···F_{s+1}(X_s^x) − F_t···F_{s+1}(X_s^{x0})‖^p / E‖X_s^x − X_s^{x0}‖^p
/// with both trajectories driven by the same realised inputs. Sample i uses
/// stream i of the seed.
ContractionEstimate estimate_contraction(const SystemSpec& spec, const Vector& x, const Vector& x0,
                                         std::size_t s, std::size_t t, double p, std::size_t samples,
                                         std::uint64_t seed, unsigned threads = 1);

struct WindowBound {
    std::size_t k = 0;
    double bound = 0.0;
};

struct DecayFit {
    bool contractive = false;
    double c = 0.0;
    double lambda = 0.0;
    double slope = 0.0;      // of log bound against k
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Least-squares fit of log bound = log C + k log λ. Reports contractive
/// only for a negative slope with R² ≥ 0.9.
DecayFit fit_decay(std::span<const WindowBound> windows);

struct ContractionReport {
    std::vector<WindowBound> window_bounds;
    double p = 1.0;
    DecayFit fit;
    std::string method;  // "exact" or "monte-carlo"

    bool non_contractive() const { return !fit.contractive; }
};

/// Exact bounds for k = 1..max_k plus the decay fit.
ContractionReport exact_contraction_report(const MapEnsemble& ensemble, std::size_t max_k, double p);

struct ProbePair {
    Vector x;
    Vector x0;
};

/// Monte-Carlo report: for each window length k the worst ratio over the
/// probe pairs and window offsets.
ContractionReport monte_carlo_contraction_report(const SystemSpec& spec, std::span<const ProbePair> probes,
                                                 std::span<const std::size_t> offsets, std::size_t max_k,
                                                 double p, std::size_t samples, std::uint64_t seed,
                                                 unsigned threads = 1);

/// Default probes: x0 = 0 paired with each scaled unit vector.
std::vector<ProbePair> default_probes(Index dimension, double scale = 1.0);

} // namespace rdsrnn
