#pragma once

#include "rdsrnn/contraction.hpp"
#include "rdsrnn/kalman.hpp"
#include "rdsrnn/metrics.hpp"
#include "rdsrnn/rnn.hpp"
#include "rdsrnn/serialization.hpp"
#include "rdsrnn/system.hpp"
#include "rdsrnn/train.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rdsrnn {

inline constexpr int kConfigSchemaVersion = 1;

enum class ExperimentKind { fern, fern_train, ou_counterexample, kalman_approx, contraction_report, memory_bank_demo };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);

struct Horizons {
    std::size_t train_horizon = 50;
    std::size_t train_count = 1000;
    std::size_t test_horizon = 10000;
    std::size_t test_count = 2000;
};

struct FernParams {
    SystemSpec system;
    Vector x0 = Vector::Zero(2);
    std::size_t steps = 100'000;
    std::size_t bins = 100;
};

struct FernTrainParams {
    SystemSpec system;
    Vector x0 = Vector::Zero(2);
    std::vector<Index> hidden{6};
    FeedbackKind feedback = FeedbackKind::last_layer;
};

struct OuParams {
    double rho = 20.0;
    double sigma = 1.0;
    double initial_mean = 20.0;
    double initial_variance = 1.0;
    double bias = 1e6;
    std::vector<double> alphas{0.99, 1.0, 1.001};
    std::vector<double> deltas;  // defaults to 0.005, 0.010, ..., 0.100
    double headline_delta = 0.1;
};

struct KalmanParams {
    LgssmModel model;
    std::vector<Index> hidden{8};
    FeedbackKind feedback = FeedbackKind::last_layer;
};

struct ContractionParams {
    SystemSpec system;
    std::string method = "exact";  // or "monte-carlo"
    std::size_t max_k = 8;
    double p = 1.0;
    std::size_t samples = 10'000;
    std::vector<std::size_t> offsets{0, 10};
    double probe_scale = 1.0;
};

struct MemoryBankParams {
    Index state_dimension = 2;
    Index input_dimension = 1;
    std::size_t horizon = 5;
    std::optional<double> bias;  // calibrated when absent
    Vector x0 = Vector::Zero(2);
    double input_scale = 1.0;    // inputs are N(0, input_scale²)
    std::size_t calibration_samples = 10'000;
};

using ExperimentParams =
    std::variant<FernParams, FernTrainParams, OuParams, KalmanParams, ContractionParams, MemoryBankParams>;

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::fern;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::filesystem::path output_directory;
    Horizons horizons;
    TrainConfig train;
    ExperimentParams params;

    void validate() const;
};

/// Defaults for each experiment before any config keys are applied.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses a config document; missing keys keep default_config values.
ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& config);

struct ExperimentResult {
    std::vector<std::filesystem::path> files;
    Json summary;
    std::vector<std::string> messages;
};

/// Runs the configured experiment and writes its outputs into
/// config.output_directory.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Pipelines shared with the acceptance checks.

/// Non-accumulation check on an error curve: mean over the final 10% of
/// the horizon against the mean over [early_first, early_last], and the
/// least-squares slope over [slope_first, T].
struct TimeUniformity {
    double early_mean = 0.0;
    double late_mean = 0.0;
    double ratio = 0.0;
    double slope = 0.0;
    std::size_t late_first = 0;
    bool passed = false;
};

TimeUniformity assess_time_uniformity(const ErrorCurve& curve, std::size_t early_first = 40,
                                      std::size_t early_last = 50, std::size_t slope_first = 100,
                                      double max_ratio = 1.5, double max_slope = 1e-6);

struct CoupledEvaluation {
    ErrorCurve curve;
    /// Checksums of the input streams seen by the reference system and by
    /// the network; equal when the coupling holds.
    std::uint64_t reference_checksum = 0;
    std::uint64_t network_checksum = 0;
};

/// Start state for test rollouts: the training report's stationary start
/// when present, otherwise x0.
NetworkState test_start_state(const TrainReport& report, const Vector& x0);

/// Rolls the network along test trajectories of a system from x0; path n
/// uses stream n of test_seed.
CoupledEvaluation evaluate_on_system(const Network& net, const NetworkState& start, const SystemSpec& spec,
                                     const Vector& x0, std::size_t horizon, std::size_t count,
                                     std::uint64_t test_seed, unsigned threads);

struct FernTrainOutcome {
    TrainReport report;
    CoupledEvaluation evaluation;
    TimeUniformity uniformity;
};

FernTrainOutcome run_fern_training(const FernTrainParams& params, const Horizons& horizons, const TrainConfig& train,
                                   std::uint64_t seed, unsigned threads);

/// Error curve of the one-unit ReLU network against the OU recursion with
/// coupled noise and X̂0 = X0 ~ N(initial_mean, initial_variance).
CoupledEvaluation ou_error_curve(const OuParams& params, double alpha, double delta, std::size_t horizon,
                                 std::size_t realizations, std::uint64_t seed, unsigned threads);

/// δ(1 − αᵗ)/(1 − α), or δt when α = 1.
double ou_error_closed_form(double alpha, double delta, std::size_t t);

struct KalmanOutcome {
    TrainReport report;
    ErrorCurve mean_curve;   // filter-mean error
    ErrorCurve state_curve;  // full encoded filter-state error
    std::uint64_t reference_checksum = 0;
    std::uint64_t network_checksum = 0;
    TimeUniformity uniformity;
};

KalmanOutcome run_kalman_approximation(const KalmanParams& params, const Horizons& horizons,
                                       const TrainConfig& train, std::uint64_t seed, unsigned threads);

ContractionReport run_contraction(const ContractionParams& params, std::uint64_t seed, unsigned threads);

} // namespace rdsrnn
