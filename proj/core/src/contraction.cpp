#include "rdsrnn/contraction.hpp"

#include "rdsrnn/error.hpp"
#include "rdsrnn/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsrnn {

namespace {

struct Enumerator {
    const MapEnsemble& ensemble;
    std::size_t k;
    double p;
    double total = 0.0;

    void descend(const Matrix& product, double weight, std::size_t depth) {
        if (depth == k) {
            total += weight * std::pow(spectral_norm(product), p);
            return;
        }
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            const double w = weight * ensemble.probabilities[i];
            if (w == 0.0) continue;
            descend(ensemble.maps[i].matrix * product, w, depth + 1);
        }
    }
};

} // namespace

double exact_affine_bound(const MapEnsemble& ensemble, std::size_t k, double p, std::uint64_t max_sequences) {
    ensemble.validate();
    if (k == 0) throw InputError("window length k must be >= 1");
    if (!(p >= 1.0)) throw InputError("moment order p must be >= 1");
    std::uint64_t count = 1;
    for (std::size_t j = 0; j < k; ++j) {
        if (count > max_sequences / ensemble.size()) {
            throw SizeError(fmt::format("{}^{} index sequences exceed the enumeration cap of {}", ensemble.size(),
                                        k, max_sequences));
        }
        count *= ensemble.size();
    }
    if (count > max_sequences) {
        throw SizeError(fmt::format("{} index sequences exceed the enumeration cap of {}", count, max_sequences));
    }
    Enumerator e{ensemble, k, p};
    const Index d = ensemble.dimension();
    e.descend(Matrix::Identity(d, d), 1.0, 0);
    return e.total;
}

ContractionEstimate estimate_contraction(const SystemSpec& spec, const Vector& x, const Vector& x0,
                                         std::size_t s, std::size_t t, double p, std::size_t samples,
                                         std::uint64_t seed, unsigned threads) {
    spec.validate();
    if (!(t > s)) throw InputError("estimate_contraction needs t > s");
    if (!(p >= 1.0)) throw InputError("moment order p must be >= 1");
    if (samples == 0) throw InputError("estimate_contraction needs at least one sample");
    if (x.size() != spec.state_dimension() || x0.size() != spec.state_dimension()) {
        throw InputError("probe state dimension mismatch");
    }
    if (x == x0) throw InputError("probe states must differ");

    std::vector<double> numerators(samples);
    std::vector<double> denominators(samples);
    parallel_for(samples, threads, [&](std::size_t i) {
        InputSampler sampler(spec, Pcg32(seed, i));
        Vector a = x;
        Vector b = x0;
        Vector na(a.size());
        Vector nb(b.size());
        for (std::size_t step_index = 1; step_index <= t; ++step_index) {
            const Input u = sampler.next();
            step_into(spec, a, u, na);
            step_into(spec, b, u, nb);
            a.swap(na);
            b.swap(nb);
            if (step_index == s) denominators[i] = std::pow((a - b).norm(), p);
        }
        if (s == 0) denominators[i] = std::pow((x - x0).norm(), p);
        numerators[i] = std::pow((a - b).norm(), p);
    });

    const double n = static_cast<double>(samples);
    ContractionEstimate est;
    est.samples = samples;
    est.numerator_mean = pairwise_sum(numerators) / n;
    est.denominator_mean = pairwise_sum(denominators) / n;
    if (est.denominator_mean < 1e-300) {
        throw CouplingCollapsedError("coupled trajectories merged before the window start");
    }
    est.ratio = est.numerator_mean / est.denominator_mean;
    std::vector<double> residuals(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double r = numerators[i] - est.ratio * denominators[i];
        residuals[i] = r * r;
    }
    const double variance = samples > 1 ? pairwise_sum(residuals) / (n - 1.0) : 0.0;
    est.standard_error = std::sqrt(variance / n) / est.denominator_mean;
    return est;
}

DecayFit fit_decay(std::span<const WindowBound> windows) {
    if (windows.size() < 3) throw InputError("fit_decay needs at least 3 windows");
    std::vector<double> ks;
    std::vector<double> logs;
    for (const auto& w : windows) {
        if (!(w.bound > 0.0) || !std::isfinite(w.bound)) {
            throw DegenerateInputError(fmt::format("window {} has non-positive bound {}", w.k, w.bound));
        }
        ks.push_back(static_cast<double>(w.k));
        logs.push_back(std::log(w.bound));
    }
    const double n = static_cast<double>(ks.size());
    double mean_k = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        mean_k += ks[i];
        mean_y += logs[i];
    }
    mean_k /= n;
    mean_y /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        sxx += (ks[i] - mean_k) * (ks[i] - mean_k);
        sxy += (ks[i] - mean_k) * (logs[i] - mean_y);
        syy += (logs[i] - mean_y) * (logs[i] - mean_y);
    }
    if (sxx == 0.0) throw DegenerateInputError("fit_decay needs distinct window lengths");
    DecayFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_k;
    // A perfectly flat series has no variance to explain.
    fit.r_squared = syy == 0.0 ? 0.0 : (sxy * sxy) / (sxx * syy);
    fit.c = std::exp(fit.intercept);
    fit.lambda = std::exp(fit.slope);
    fit.contractive = fit.slope < 0.0 && fit.r_squared >= 0.9;
    return fit;
}

ContractionReport exact_contraction_report(const MapEnsemble& ensemble, std::size_t max_k, double p) {
    ContractionReport report;
    report.p = p;
    report.method = "exact";
    for (std::size_t k = 1; k <= max_k; ++k) {
        report.window_bounds.push_back({k, exact_affine_bound(ensemble, k, p)});
    }
    report.fit = fit_decay(report.window_bounds);
    return report;
}

ContractionReport monte_carlo_contraction_report(const SystemSpec& spec, std::span<const ProbePair> probes,
                                                 std::span<const std::size_t> offsets, std::size_t max_k,
                                                 double p, std::size_t samples, std::uint64_t seed,
                                                 unsigned threads) {
    if (probes.empty() || offsets.empty()) throw InputError("contraction report needs probes and offsets");
    ContractionReport report;
    report.p = p;
    report.method = "monte-carlo";
    for (std::size_t k = 1; k <= max_k; ++k) {
        double worst = 0.0;
        for (const auto& probe : probes) {
            for (std::size_t s : offsets) {
                worst = std::max(worst,
                                 estimate_contraction(spec, probe.x, probe.x0, s, s + k, p, samples, seed, threads).ratio);
            }
        }
        report.window_bounds.push_back({k, worst});
    }
    report.fit = fit_decay(report.window_bounds);
    return report;
}

std::vector<ProbePair> default_probes(Index dimension, double scale) {
    std::vector<ProbePair> probes;
    for (Index j = 0; j < dimension; ++j) {
        probes.push_back({scale * Vector::Unit(dimension, j), Vector::Zero(dimension)});
    }
    return probes;
}

} // namespace rdsrnn
