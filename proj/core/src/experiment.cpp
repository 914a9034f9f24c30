#include "rdsrnn/experiment.hpp"

#include "rdsrnn/csv.hpp"
#include "rdsrnn/error.hpp"
#include "rdsrnn/presets.hpp"
#include "rdsrnn/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsrnn {

namespace fs = std::filesystem;

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::fern: return "fern";
    case ExperimentKind::fern_train: return "fern-train";
    case ExperimentKind::ou_counterexample: return "ou-counterexample";
    case ExperimentKind::kalman_approx: return "kalman-approx";
    case ExperimentKind::contraction_report: return "contraction-report";
    case ExperimentKind::memory_bank_demo: return "memory-bank-demo";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
    for (auto kind : {ExperimentKind::fern, ExperimentKind::fern_train, ExperimentKind::ou_counterexample,
                      ExperimentKind::kalman_approx, ExperimentKind::contraction_report,
                      ExperimentKind::memory_bank_demo})
        if (to_string(kind) == name) return kind;
    throw ConfigurationError(fmt::format("unknown experiment '{}'", name));
}

namespace {

LgssmModel scalar_lgssm() {
    return {Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0),
            Matrix::Constant(1, 1, 1.0), Vector::Zero(1),             Matrix::Constant(1, 1, 1.0)};
}

std::vector<double> default_deltas() {
    std::vector<double> deltas;
    for (int i = 1; i <= 20; ++i) deltas.push_back(0.005 * i);
    return deltas;
}

} // namespace

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig config;
    config.kind = kind;
    switch (kind) {
    case ExperimentKind::fern:
        config.params = FernParams{presets::barnsley_fern_system()};
        break;
    case ExperimentKind::fern_train:
        config.params = FernTrainParams{presets::simplified_fern_system()};
        config.train.init = InitPolicy::stationary;
        config.train.learning_rate = 1e-2;
        config.train.batch_size = 50;
        config.train.epochs = 150;
        config.train.gradient_clip = 1.0;
        break;
    case ExperimentKind::ou_counterexample: {
        OuParams p;
        p.deltas = default_deltas();
        config.params = p;
        config.horizons.test_horizon = 5000;
        config.horizons.test_count = 5000;
        break;
    }
    case ExperimentKind::kalman_approx:
        config.params = KalmanParams{scalar_lgssm()};
        config.train.learning_rate = 1e-2;
        config.train.batch_size = 50;
        config.train.epochs = 150;
        config.train.gradient_clip = 1.0;
        config.horizons.test_horizon = 5000;
        break;
    case ExperimentKind::contraction_report: {
        ContractionParams p;
        p.system.kind = IfsSystem{presets::two_map_average_contraction()};
        config.params = p;
        break;
    }
    case ExperimentKind::memory_bank_demo:
        config.params = MemoryBankParams{};
        break;
    }
    return config;
}

void ExperimentConfig::validate() const {
    if (horizons.train_horizon == 0 || horizons.train_count == 0 || horizons.test_horizon == 0 ||
        horizons.test_count == 0)
        throw ConfigurationError("all horizons must be positive");
    train.validate();
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FernParams>) {
                p.system.validate();
                if (p.x0.size() != p.system.state_dimension()) throw ConfigurationError("x0 has the wrong dimension");
                if (p.steps == 0 || p.bins == 0) throw ConfigurationError("steps and bins must be positive");
            } else if constexpr (std::is_same_v<T, FernTrainParams>) {
                p.system.validate();
                if (p.x0.size() != p.system.state_dimension()) throw ConfigurationError("x0 has the wrong dimension");
                if (p.hidden.empty()) throw ConfigurationError("at least one hidden layer is required");
            } else if constexpr (std::is_same_v<T, OuParams>) {
                if (p.alphas.empty() || p.deltas.empty()) throw ConfigurationError("alphas and deltas must be nonempty");
                if (!(p.bias > 0.0)) throw ConfigurationError("bias must be positive");
                if (!(p.sigma >= 0.0) || !(p.initial_variance >= 0.0))
                    throw ConfigurationError("variances must be nonnegative");
            } else if constexpr (std::is_same_v<T, KalmanParams>) {
                p.model.validate();
                if (p.hidden.empty()) throw ConfigurationError("at least one hidden layer is required");
            } else if constexpr (std::is_same_v<T, ContractionParams>) {
                p.system.validate();
                if (p.method != "exact" && p.method != "monte-carlo")
                    throw ConfigurationError(fmt::format("unknown contraction method '{}'", p.method));
                if (p.max_k < 3) throw ConfigurationError("max_k must be at least 3 for the decay fit");
                if (!(p.p > 0.0)) throw ConfigurationError("p must be positive");
            } else {
                if (p.horizon == 0) throw ConfigurationError("memory horizon must be positive");
                if (p.x0.size() != p.state_dimension) throw ConfigurationError("x0 has the wrong dimension");
                if (p.bias && !(*p.bias > 0.0)) throw ConfigurationError("bias must be positive");
            }
        },
        params);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& target) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return;
    try {
        target = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigurationError(fmt::format("key '{}': {}", key, e.what()));
    }
}

void read_vector_if(const Json& j, const char* key, Vector& target) {
    if (j.is_object() && j.contains(key)) target = vector_from_json(j.at(key));
}

void read_feedback_if(const Json& j, FeedbackKind& target) {
    if (j.is_object() && j.contains("feedback")) target = feedback_kind_from_string(j.at("feedback").get<std::string>());
}

SystemSpec system_or_preset(const Json& j, const SystemSpec& fallback) {
    if (!j.is_object() || j.empty()) return fallback;
    if (!j.contains("kind") && j.contains("preset")) {
        SystemSpec spec;
        spec.kind = IfsSystem{presets::ensemble_by_name(j.at("preset").get<std::string>())};
        return spec;
    }
    return system_from_json(j);
}

} // namespace

ExperimentConfig experiment_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
    if (j.contains("schema_version") && j.at("schema_version") != kConfigSchemaVersion)
        throw ConfigurationError(fmt::format("unsupported config schema version {}", j.at("schema_version").dump()));
    if (!j.contains("experiment")) throw ConfigurationError("config is missing 'experiment'");
    ExperimentConfig config = default_config(experiment_kind_from_string(j.at("experiment").get<std::string>()));
    read_if(j, "seed", config.seed);
    read_if(j, "threads", config.threads);
    if (j.contains("output_directory")) config.output_directory = j.at("output_directory").get<std::string>();

    const Json empty = Json::object();
    const Json& horizons = j.contains("horizons") ? j.at("horizons") : empty;
    read_if(horizons, "train_horizon", config.horizons.train_horizon);
    read_if(horizons, "train_count", config.horizons.train_count);
    read_if(horizons, "test_horizon", config.horizons.test_horizon);
    read_if(horizons, "test_count", config.horizons.test_count);

    if (j.contains("train")) {
        Json merged = train_config_to_json(config.train);
        merged.update(j.at("train"));
        config.train = train_config_from_json(merged);
    }

    const Json& system = j.contains("system") ? j.at("system") : empty;
    const Json& params = j.contains("parameters") ? j.at("parameters") : empty;
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FernParams>) {
                p.system = system_or_preset(system, p.system);
                read_if(params, "steps", p.steps);
                read_if(params, "bins", p.bins);
                read_vector_if(params, "x0", p.x0);
            } else if constexpr (std::is_same_v<T, FernTrainParams>) {
                p.system = system_or_preset(system, p.system);
                read_if(params, "hidden", p.hidden);
                read_feedback_if(params, p.feedback);
                read_vector_if(params, "x0", p.x0);
            } else if constexpr (std::is_same_v<T, OuParams>) {
                read_if(system, "rho", p.rho);
                read_if(system, "sigma", p.sigma);
                read_if(system, "initial_mean", p.initial_mean);
                read_if(system, "initial_variance", p.initial_variance);
                read_if(params, "alphas", p.alphas);
                read_if(params, "deltas", p.deltas);
                read_if(params, "bias", p.bias);
                read_if(params, "headline_delta", p.headline_delta);
            } else if constexpr (std::is_same_v<T, KalmanParams>) {
                if (!system.empty()) p.model = lgssm_from_json(system);
                read_if(params, "hidden", p.hidden);
                read_feedback_if(params, p.feedback);
            } else if constexpr (std::is_same_v<T, ContractionParams>) {
                p.system = system_or_preset(system, p.system);
                read_if(params, "method", p.method);
                read_if(params, "max_k", p.max_k);
                read_if(params, "p", p.p);
                read_if(params, "samples", p.samples);
                read_if(params, "offsets", p.offsets);
                read_if(params, "probe_scale", p.probe_scale);
            } else {
                read_if(system, "state_dimension", p.state_dimension);
                read_if(system, "input_dimension", p.input_dimension);
                read_if(system, "input_scale", p.input_scale);
                if (system.contains("x0"))
                    p.x0 = vector_from_json(system.at("x0"));
                else
                    p.x0 = Vector::Zero(p.state_dimension);
                read_if(params, "horizon", p.horizon);
                if (params.contains("bias") && !params.at("bias").is_null()) p.bias = params.at("bias").get<double>();
                read_if(params, "calibration_samples", p.calibration_samples);
            }
        },
        config.params);
    config.validate();
    return config;
}

Json experiment_config_to_json(const ExperimentConfig& config) {
    Json j = {{"schema_version", kConfigSchemaVersion},
              {"experiment", std::string(to_string(config.kind))},
              {"seed", config.seed},
              {"threads", config.threads},
              {"horizons",
               {{"train_horizon", config.horizons.train_horizon},
                {"train_count", config.horizons.train_count},
                {"test_horizon", config.horizons.test_horizon},
                {"test_count", config.horizons.test_count}}},
              {"train", train_config_to_json(config.train)}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FernParams>) {
                j["system"] = system_to_json(p.system);
                j["parameters"] = {{"steps", p.steps}, {"bins", p.bins}, {"x0", vector_to_json(p.x0)}};
            } else if constexpr (std::is_same_v<T, FernTrainParams>) {
                j["system"] = system_to_json(p.system);
                j["parameters"] = {{"hidden", p.hidden},
                                   {"feedback", std::string(to_string(p.feedback))},
                                   {"x0", vector_to_json(p.x0)}};
            } else if constexpr (std::is_same_v<T, OuParams>) {
                j["system"] = {{"rho", p.rho},
                               {"sigma", p.sigma},
                               {"initial_mean", p.initial_mean},
                               {"initial_variance", p.initial_variance}};
                j["parameters"] = {
                    {"alphas", p.alphas}, {"deltas", p.deltas}, {"bias", p.bias}, {"headline_delta", p.headline_delta}};
            } else if constexpr (std::is_same_v<T, KalmanParams>) {
                j["system"] = lgssm_to_json(p.model);
                j["parameters"] = {{"hidden", p.hidden}, {"feedback", std::string(to_string(p.feedback))}};
            } else if constexpr (std::is_same_v<T, ContractionParams>) {
                j["system"] = system_to_json(p.system);
                j["parameters"] = {{"method", p.method},   {"max_k", p.max_k},     {"p", p.p},
                                   {"samples", p.samples}, {"offsets", p.offsets}, {"probe_scale", p.probe_scale}};
            } else {
                j["system"] = {{"state_dimension", p.state_dimension},
                               {"input_dimension", p.input_dimension},
                               {"input_scale", p.input_scale},
                               {"x0", vector_to_json(p.x0)}};
                j["parameters"] = {{"horizon", p.horizon},
                                   {"bias", p.bias ? Json(*p.bias) : Json(nullptr)},
                                   {"calibration_samples", p.calibration_samples}};
            }
        },
        config.params);
    return j;
}

// ---------------------------------------------------------------------------
// Shared pipelines

TimeUniformity assess_time_uniformity(const ErrorCurve& curve, std::size_t early_first, std::size_t early_last,
                                      std::size_t slope_first, double max_ratio, double max_slope) {
    const std::size_t T = curve.horizon();
    if (T < slope_first + 1 || T < early_last) throw InputError("curve is too short for the uniformity check");
    TimeUniformity out;
    out.late_first = T - T / 10;
    out.early_mean = window_mean(curve, early_first, early_last);
    out.late_mean = window_mean(curve, out.late_first, T);
    out.ratio = out.late_mean / out.early_mean;
    out.slope = curve_slope(curve, slope_first, T);
    out.passed = std::isfinite(out.ratio) && out.ratio <= max_ratio && out.slope <= max_slope;
    return out;
}

NetworkState test_start_state(const TrainReport& report, const Vector& x0) {
    return initial_network_state(report.network, report.stationary_start ? *report.stationary_start : x0);
}

namespace {

std::uint64_t combine_checksums(std::span<const std::uint64_t> parts) {
    Checksum sum;
    for (std::uint64_t p : parts) sum.add(p);
    return sum.value();
}

} // namespace

CoupledEvaluation evaluate_on_system(const Network& net, const NetworkState& start, const SystemSpec& spec,
                                     const Vector& x0, std::size_t horizon, std::size_t count,
                                     std::uint64_t test_seed, unsigned threads) {
    spec.validate();
    net.validate();
    if (x0.size() != spec.state_dimension()) throw InputError("x0 does not match the system");
    if (net.topology.output_dimension() != spec.state_dimension() ||
        net.topology.input_dimension() != network_input_dimension(spec))
        throw InputError("network does not match the system");
    std::vector<std::uint64_t> ref_sums(count);
    std::vector<std::uint64_t> net_sums(count);
    CoupledEvaluation out;
    out.curve = accumulate_error_curve(count, horizon, 2.0, threads, [&](std::size_t n, std::span<double> errors) {
        // Reference and network each draw their inputs from their own copy
        // of stream n; the checksums confirm the two streams agree.
        InputSampler reference_inputs(spec, Pcg32(test_seed, n));
        InputSampler network_inputs(spec, Pcg32(test_seed, n));
        NetworkRunner runner(net);
        Checksum ref_sum;
        Checksum net_sum;
        Vector x = x0;
        Vector next(x0.size());
        Vector state = start.feedback;
        for (std::size_t t = 0; t < horizon; ++t) {
            const Input u = reference_inputs.next();
            ref_sum.add(u);
            step_into(spec, x, u, next);
            x.swap(next);
            const Input v = network_inputs.next();
            net_sum.add(v);
            const Vector& out = runner.step(state, network_input(spec, v));
            errors[t] = (out - x).norm();
        }
        ref_sums[n] = ref_sum.value();
        net_sums[n] = net_sum.value();
    });
    out.reference_checksum = combine_checksums(ref_sums);
    out.network_checksum = combine_checksums(net_sums);
    return out;
}

FernTrainOutcome run_fern_training(const FernTrainParams& params, const Horizons& horizons, const TrainConfig& train,
                                   std::uint64_t seed, unsigned threads) {
    const SystemSpec& spec = params.system;
    spec.validate();
    const TrajectoryBatch data = simulate_batch(spec, params.x0, horizons.train_horizon,
                                                derive_seed(seed, seed_purpose::train_data), horizons.train_count,
                                                threads);
    Topology topology;
    topology.feedback = params.feedback;
    topology.widths.push_back(network_input_dimension(spec));
    topology.widths.insert(topology.widths.end(), params.hidden.begin(), params.hidden.end());
    topology.widths.push_back(spec.state_dimension());

    TrainConfig cfg = train;
    cfg.seed = seed;
    cfg.threads = threads;
    FernTrainOutcome out;
    out.report = rdsrnn::train(to_sequences(data, spec), topology, cfg);
    out.evaluation = evaluate_on_system(out.report.network, test_start_state(out.report, params.x0), spec, params.x0,
                                        horizons.test_horizon, horizons.test_count,
                                        derive_seed(seed, seed_purpose::test_data), threads);
    out.uniformity = assess_time_uniformity(out.evaluation.curve);
    return out;
}

double ou_error_closed_form(double alpha, double delta, std::size_t t) {
    if (alpha == 1.0) return delta * static_cast<double>(t);
    return delta * (1.0 - std::pow(alpha, static_cast<double>(t))) / (1.0 - alpha);
}

CoupledEvaluation ou_error_curve(const OuParams& params, double alpha, double delta, std::size_t horizon,
                                 std::size_t realizations, std::uint64_t seed, unsigned threads) {
    const SystemSpec spec = presets::ou_system(params.rho, alpha, params.sigma);
    const Network net = ou_relu_network(params.rho, alpha, params.bias, delta);
    const std::uint64_t noise_seed = derive_seed(seed, seed_purpose::test_data);
    const std::uint64_t start_seed = derive_seed(seed, seed_purpose::initial_state);
    const double initial_sd = std::sqrt(params.initial_variance);
    std::vector<std::uint64_t> ref_sums(realizations);
    std::vector<std::uint64_t> net_sums(realizations);
    CoupledEvaluation out;
    out.curve = accumulate_error_curve(realizations, horizon, 2.0, threads, [&](std::size_t n, std::span<double> errors) {
        Pcg32 start_rng(start_seed, n);
        const double x0 = params.initial_mean + initial_sd * start_rng.normal();
        InputSampler reference_inputs(spec, Pcg32(noise_seed, n));
        InputSampler network_inputs(spec, Pcg32(noise_seed, n));
        NetworkRunner runner(net);
        Checksum ref_sum;
        Checksum net_sum;
        const OuSystem& ou = std::get<OuSystem>(spec.kind);
        double x = x0;
        Vector state = Vector::Constant(1, x0);
        for (std::size_t t = 0; t < horizon; ++t) {
            const Input u = reference_inputs.next();
            ref_sum.add(u);
            x = ou.apply(x, std::get<Vector>(u)(0));
            const Input v = network_inputs.next();
            net_sum.add(v);
            errors[t] = std::abs(runner.step(state, std::get<Vector>(v))(0) - x);
        }
        ref_sums[n] = ref_sum.value();
        net_sums[n] = net_sum.value();
    });
    out.curve.alpha = alpha;
    out.curve.delta = delta;
    out.curve.label = fmt::format("alpha={} delta={}", alpha, delta);
    out.reference_checksum = combine_checksums(ref_sums);
    out.network_checksum = combine_checksums(net_sums);
    return out;
}

KalmanOutcome run_kalman_approximation(const KalmanParams& params, const Horizons& horizons, const TrainConfig& train,
                                       std::uint64_t seed, unsigned threads) {
    const LgssmModel& model = params.model;
    model.validate();
    const Index dz = model.signal_dimension();
    const SequenceBatch data = filter_sequences(model, horizons.train_horizon,
                                                derive_seed(seed, seed_purpose::train_data), horizons.train_count,
                                                threads);
    Topology topology;
    topology.feedback = params.feedback;
    topology.widths.push_back(model.observation_dimension());
    topology.widths.insert(topology.widths.end(), params.hidden.begin(), params.hidden.end());
    topology.widths.push_back(encoded_dimension(dz));

    TrainConfig cfg = train;
    cfg.seed = seed;
    cfg.threads = threads;
    KalmanOutcome out;
    out.report = rdsrnn::train(data, topology, cfg);

    const Network& net = out.report.network;
    const NetworkState start = test_start_state(out.report, encode_filter_state(initial_filter_state(model)));
    const std::uint64_t test_seed = derive_seed(seed, seed_purpose::test_data);
    const std::size_t count = horizons.test_count;
    const std::size_t horizon = horizons.test_horizon;
    std::vector<std::uint64_t> ref_sums(count);
    std::vector<std::uint64_t> net_sums(count);
    auto curves = accumulate_error_curves(
        count, horizon, 2, 2.0, threads, [&](std::size_t n, std::span<std::vector<double>> errors) {
            const LgssmTrajectory reference = simulate_lgssm(model, horizon, test_seed, n);
            const LgssmTrajectory network_side = simulate_lgssm(model, horizon, test_seed, n);
            NetworkRunner runner(net);
            Checksum ref_sum;
            Checksum net_sum;
            FilterState filter = initial_filter_state(model);
            Vector state = start.feedback;
            for (std::size_t t = 0; t < horizon; ++t) {
                ref_sum.add(reference.observations[t]);
                filter = kalman_step(model, filter, reference.observations[t]);
                net_sum.add(network_side.observations[t]);
                const Vector& x = runner.step(state, network_side.observations[t]);
                errors[0][t] = (x.head(dz) - filter.mean).norm();
                errors[1][t] = (x - encode_filter_state(filter)).norm();
            }
            ref_sums[n] = ref_sum.value();
            net_sums[n] = net_sum.value();
        });
    out.mean_curve = std::move(curves[0]);
    out.mean_curve.label = "filter mean";
    out.state_curve = std::move(curves[1]);
    out.state_curve.label = "filter state";
    out.reference_checksum = combine_checksums(ref_sums);
    out.network_checksum = combine_checksums(net_sums);
    out.uniformity = assess_time_uniformity(out.mean_curve);
    return out;
}

ContractionReport run_contraction(const ContractionParams& params, std::uint64_t seed, unsigned threads) {
    const SystemSpec& spec = params.system;
    spec.validate();
    if (params.method == "exact") {
        const MapEnsemble* ensemble = nullptr;
        if (const auto* ifs = std::get_if<IfsSystem>(&spec.kind)) ensemble = &ifs->ensemble;
        if (const auto* sw = std::get_if<SwitchedAffineSystem>(&spec.kind)) ensemble = &sw->ensemble;
        if (ensemble == nullptr) throw ConfigurationError("exact bounds need an ifs or switched-affine system");
        return exact_contraction_report(*ensemble, params.max_k, params.p);
    }
    const std::vector<ProbePair> probes = default_probes(spec.state_dimension(), params.probe_scale);
    return monte_carlo_contraction_report(spec, probes, params.offsets, params.max_k, params.p, params.samples,
                                          derive_seed(seed, seed_purpose::test_data), threads);
}

// ---------------------------------------------------------------------------
// Experiment runners

namespace {

struct Output {
    fs::path dir;
    ExperimentResult result;

    void text(const std::string& name, const std::string& content) {
        write_text_file(dir / name, content);
        result.files.push_back(dir / name);
    }
    void json(const std::string& name, const Json& j) {
        write_json_file(dir / name, j);
        result.files.push_back(dir / name);
    }
    void lines(const std::string& name, std::span<const Series> series, const PlotOptions& options) {
        emit_line_plot(dir / name, series, options);
        result.files.push_back(dir / name);
    }
};

Series curve_series(const ErrorCurve& curve, std::string label) {
    Series s;
    s.label = std::move(label);
    for (std::size_t t = 1; t <= curve.horizon(); ++t) {
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(curve.at(t));
    }
    return s;
}

Json uniformity_json(const TimeUniformity& u) {
    return {{"early_window", {40, 50}},
            {"early_mean", u.early_mean},
            {"late_first", u.late_first},
            {"late_mean", u.late_mean},
            {"ratio", u.ratio},
            {"slope", u.slope},
            {"time_uniform", u.passed}};
}

Json coupling_json(std::uint64_t reference, std::uint64_t network) {
    return {{"reference", fmt::format("{:016x}", reference)},
            {"network", fmt::format("{:016x}", network)},
            {"coupled", reference == network}};
}

void require_coupled(std::uint64_t reference, std::uint64_t network) {
    if (reference != network) throw Error("reference and network consumed different input streams");
}

void run_fern(const ExperimentConfig& config, const FernParams& p, Output& out) {
    const Trajectory traj = simulate(p.system, p.x0, p.steps, config.seed, 0);
    out.text("trajectory.csv", trajectory_table(traj).text());

    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    std::vector<double> xs;
    std::vector<double> ys;
    const Index dx = p.system.state_dimension();
    for (std::size_t t = 1; t < traj.states.size(); ++t) {
        const Vector& s = traj.states[t];
        const double x = s(0);
        const double y = dx > 1 ? s(1) : 0.0;
        xs.push_back(x);
        ys.push_back(y);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    const std::size_t bins = p.bins;
    std::vector<std::size_t> counts(bins * bins, 0);
    auto bin_of = [bins](double v, double lo, double hi) {
        if (hi <= lo) return std::size_t{0};
        const auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        return std::min(b, bins - 1);
    };
    for (std::size_t i = 0; i < xs.size(); ++i) ++counts[bin_of(xs[i], xmin, xmax) * bins + bin_of(ys[i], ymin, ymax)];
    CsvTable hist({"x_lo", "x_hi", "y_lo", "y_hi", "count"});
    const double wx = (xmax - xmin) / static_cast<double>(bins);
    const double wy = (ymax - ymin) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        for (std::size_t k = 0; k < bins; ++k) {
            const double row[] = {xmin + wx * static_cast<double>(i), xmin + wx * static_cast<double>(i + 1),
                                  ymin + wy * static_cast<double>(k), ymin + wy * static_cast<double>(k + 1),
                                  static_cast<double>(counts[i * bins + k])};
            hist.add_row(row);
        }
    }
    out.text("histogram.csv", hist.text());

    PlotOptions options;
    options.title = fmt::format("{} trajectory, {} steps", p.system.kind_name(), p.steps);
    options.x_label = "x_0";
    options.y_label = "x_1";
    options.width = 600;
    options.height = 800;
    emit_scatter(out.dir / "plot.svg", xs, ys, options);
    out.result.files.push_back(out.dir / "plot.svg");

    out.result.summary = {{"steps", p.steps},
                          {"bounding_box", {{"x", {xmin, xmax}}, {"y", {ymin, ymax}}}},
                          {"input_checksum", fmt::format("{:016x}", input_checksum(TrajectoryBatch{std::vector<Trajectory>{traj}}))}};
}

void run_fern_train(const ExperimentConfig& config, const FernTrainParams& p, Output& out) {
    const FernTrainOutcome result = run_fern_training(p, config.horizons, config.train, config.seed, config.threads);
    require_coupled(result.evaluation.reference_checksum, result.evaluation.network_checksum);
    out.text("curve.csv", curve_table(result.evaluation.curve).text());
    out.text("loss.csv", loss_table(result.report.loss_history).text());
    out.json("model.json", network_to_json(result.report.network,
                                           test_start_state(result.report, p.x0)));
    out.json("train_report.json", train_report_to_json(result.report));
    const Series series[] = {curve_series(result.evaluation.curve, "test RMSE")};
    PlotOptions options;
    options.title = "Trained network vs system, coupled test trajectories";
    options.x_label = "t";
    options.y_label = "RMSE";
    out.lines("plot.svg", series, options);
    out.result.summary = {{"final_loss", result.report.loss_history.back()},
                          {"wall_time_seconds", result.report.wall_time_seconds},
                          {"test_count", config.horizons.test_count},
                          {"uniformity", uniformity_json(result.uniformity)},
                          {"input_checksum", coupling_json(result.evaluation.reference_checksum,
                                                           result.evaluation.network_checksum)}};
    out.result.messages.push_back(fmt::format("final training loss {:.6g}; late/early RMSE ratio {:.4f}; slope {:.3g}",
                                              result.report.loss_history.back(), result.uniformity.ratio,
                                              result.uniformity.slope));
}

void run_ou(const ExperimentConfig& config, const OuParams& p, Output& out) {
    const std::size_t T = config.horizons.test_horizon;
    const std::size_t N = config.horizons.test_count;
    const auto headline = std::min_element(p.deltas.begin(), p.deltas.end(), [&](double a, double b) {
        return std::abs(a - p.headline_delta) < std::abs(b - p.headline_delta);
    });
    CsvTable all({"alpha", "delta", "t", "rmse"});
    std::vector<Series> headline_series;
    Json per_alpha = Json::array();
    CsvTable headline_table({"t", "rmse"});
    for (double alpha : p.alphas) {
        for (double delta : p.deltas) {
            const CoupledEvaluation eval = ou_error_curve(p, alpha, delta, T, N, config.seed, config.threads);
            require_coupled(eval.reference_checksum, eval.network_checksum);
            for (std::size_t t = 1; t <= T; ++t) {
                const double row[] = {alpha, delta, static_cast<double>(t), eval.curve.at(t)};
                all.add_row(row);
            }
            if (delta != *headline) continue;
            if (alpha == p.alphas.front()) headline_table = curve_table(eval.curve);
            headline_series.push_back(curve_series(eval.curve, fmt::format("alpha = {}", alpha)));
            Json checkpoints = Json::array();
            for (std::size_t t : {std::size_t{1}, std::size_t{10}, std::size_t{100}, std::size_t{1000}, T}) {
                if (t > T) continue;
                checkpoints.push_back(
                    {{"t", t}, {"rmse", eval.curve.at(t)}, {"closed_form", ou_error_closed_form(alpha, delta, t)}});
            }
            per_alpha.push_back({{"alpha", alpha},
                                 {"delta", delta},
                                 {"checkpoints", checkpoints},
                                 {"input_checksum", coupling_json(eval.reference_checksum, eval.network_checksum)}});
            out.result.messages.push_back(fmt::format("alpha={} delta={}: RMSE at t={} is {:.6g} (closed form {:.6g})",
                                                      alpha, delta, T, eval.curve.at(T),
                                                      ou_error_closed_form(alpha, delta, T)));
        }
    }
    out.text("curve.csv", headline_table.text());
    out.text("curves.csv", all.text());
    PlotOptions options;
    options.title = fmt::format("Coupled RMSE, delta = {}", *headline);
    options.x_label = "t";
    options.y_label = "RMSE";
    options.log_y = true;
    out.lines("plot.svg", headline_series, options);
    out.result.summary = {{"realizations", N}, {"horizon", T}, {"bias", p.bias}, {"headline", per_alpha}};
}

void run_kalman(const ExperimentConfig& config, const KalmanParams& p, Output& out) {
    const KalmanOutcome result = run_kalman_approximation(p, config.horizons, config.train, config.seed, config.threads);
    require_coupled(result.reference_checksum, result.network_checksum);
    out.text("curve.csv", curve_table(result.mean_curve).text());
    out.text("curve_state.csv", curve_table(result.state_curve).text());
    out.text("loss.csv", loss_table(result.report.loss_history).text());
    out.json("model.json", network_to_json(result.report.network,
                                           test_start_state(result.report,
                                                            encode_filter_state(initial_filter_state(p.model)))));
    out.json("train_report.json", train_report_to_json(result.report));
    const FilterPath sample = run_filter(p.model, config.horizons.train_horizon,
                                         derive_seed(config.seed, seed_purpose::train_data), 0);
    out.text("data.csv", kalman_table(sample).text());
    const Series series[] = {curve_series(result.mean_curve, "filter mean"),
                             curve_series(result.state_curve, "filter state")};
    PlotOptions options;
    options.title = "Trained network vs Kalman filter, coupled observations";
    options.x_label = "t";
    options.y_label = "RMSE";
    out.lines("plot.svg", series, options);
    out.result.summary = {{"final_loss", result.report.loss_history.back()},
                          {"wall_time_seconds", result.report.wall_time_seconds},
                          {"uniformity", uniformity_json(result.uniformity)},
                          {"state_uniformity", uniformity_json(assess_time_uniformity(result.state_curve))},
                          {"input_checksum", coupling_json(result.reference_checksum, result.network_checksum)}};
    out.result.messages.push_back(fmt::format("filter-mean late/early RMSE ratio {:.4f}; slope {:.3g}",
                                              result.uniformity.ratio, result.uniformity.slope));
}

void run_contraction_report(const ExperimentConfig& config, const ContractionParams& p, Output& out) {
    const ContractionReport report = run_contraction(p, config.seed, config.threads);
    out.json("report.json", contraction_report_to_json(report));
    CsvTable table({"k", "bound"});
    Series series;
    series.label = fmt::format("{} bound, p = {}", report.method, report.p);
    for (const WindowBound& w : report.window_bounds) {
        const double row[] = {static_cast<double>(w.k), w.bound};
        table.add_row(row);
        series.x.push_back(static_cast<double>(w.k));
        series.y.push_back(w.bound);
    }
    out.text("bounds.csv", table.text());
    PlotOptions options;
    options.title = "Window contraction bounds";
    options.x_label = "k";
    options.y_label = "bound";
    options.log_y = true;
    const Series all[] = {series};
    out.lines("plot.svg", all, options);
    out.result.summary = contraction_report_to_json(report);
    for (const WindowBound& w : report.window_bounds)
        out.result.messages.push_back(fmt::format("k={}: {:.6g}", w.k, w.bound));
    out.result.messages.push_back(report.non_contractive() ? "non-contractive"
                                                           : fmt::format("contractive, lambda = {:.6g}", report.fit.lambda));
}

void run_memory_bank(const ExperimentConfig& config, const MemoryBankParams& p, Output& out) {
    const Index du = p.input_dimension;
    double bias = 0.0;
    if (p.bias) {
        bias = *p.bias;
    } else {
        Pcg32 rng(derive_seed(config.seed, seed_purpose::calibration));
        std::vector<double> values(p.calibration_samples * static_cast<std::size_t>(du));
        for (double& v : values) v = p.input_scale * rng.normal();
        bias = calibrate_memory_bias(values);
    }
    const MemoryBank bank = build_memory_bank(p.state_dimension, du, p.horizon, bias, p.x0);
    Pcg32 init_rng(derive_seed(config.seed, seed_purpose::init));
    const Network net = memory_bank_network(bank, {}, init_rng);

    Pcg32 rng(derive_seed(config.seed, seed_purpose::test_data));
    std::vector<Vector> inputs;
    for (std::size_t t = 0; t < p.horizon; ++t) {
        Vector u(du);
        for (Index i = 0; i < du; ++i) u(i) = p.input_scale * rng.normal();
        inputs.push_back(std::move(u));
    }

    std::vector<std::string> header{"t"};
    for (Index i = 0; i < bank.width(); ++i) header.push_back(fmt::format("s_{}", i));
    CsvTable slots_table(header);
    ErrorCurve curve;
    curve.label = "slot deviation";
    NetworkRunner runner(net);
    Vector state = bank.initial.feedback;
    double max_deviation = 0.0;
    for (std::size_t t = 1; t <= p.horizon; ++t) {
        runner.step(state, inputs[t - 1]);
        const Vector slots = memory_slots(net, {state});
        Vector truth = Vector::Zero(bank.width());
        truth(0) = static_cast<double>(t);
        truth.segment(1, p.state_dimension) = p.x0;
        for (std::size_t k = 1; k <= t; ++k)
            truth.segment(1 + p.state_dimension + static_cast<Index>(k - 1) * du, du) = inputs[t - k];
        const Vector diff = slots - truth;
        max_deviation = std::max(max_deviation, diff.cwiseAbs().maxCoeff());
        curve.values.push_back(std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size())));
        std::vector<double> row{static_cast<double>(t)};
        row.insert(row.end(), slots.data(), slots.data() + slots.size());
        slots_table.add_row(row);

        std::string line = fmt::format("t={}: time {} | x0", t, slots(0));
        for (Index i = 0; i < p.state_dimension; ++i) line += fmt::format(" {}", slots(1 + i));
        line += " | slots";
        for (Index i = 1 + p.state_dimension; i < slots.size(); ++i) line += fmt::format(" {}", slots(i));
        out.result.messages.push_back(line);
    }
    curve.samples = 1;
    std::string history = "inputs:";
    for (const Vector& u : inputs)
        for (Index i = 0; i < u.size(); ++i) history += fmt::format(" {}", u(i));
    out.result.messages.push_back(history);

    out.text("slots.csv", slots_table.text());
    out.text("curve.csv", curve_table(curve).text());
    out.json("model.json", network_to_json(net, bank.initial));
    const Series series[] = {curve_series(curve, "slot RMS deviation")};
    PlotOptions options;
    options.title = "Memory-bank slot deviation from the input history";
    options.x_label = "t";
    options.y_label = "deviation";
    out.lines("plot.svg", series, options);
    out.result.summary = {{"bias", bias},
                          {"width", bank.width()},
                          {"horizon", p.horizon},
                          {"max_abs_deviation", max_deviation},
                          {"inputs", [&] {
                               Json a = Json::array();
                               for (const Vector& u : inputs) a.push_back(vector_to_json(u));
                               return a;
                           }()}};
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.output_directory.empty()) throw ConfigurationError("no output directory given");
    Output out{config.output_directory, {}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FernParams>)
                run_fern(config, p, out);
            else if constexpr (std::is_same_v<T, FernTrainParams>)
                run_fern_train(config, p, out);
            else if constexpr (std::is_same_v<T, OuParams>)
                run_ou(config, p, out);
            else if constexpr (std::is_same_v<T, KalmanParams>)
                run_kalman(config, p, out);
            else if constexpr (std::is_same_v<T, ContractionParams>)
                run_contraction_report(config, p, out);
            else
                run_memory_bank(config, p, out);
        },
        config.params);
    out.result.summary["experiment"] = std::string(to_string(config.kind));
    out.result.summary["config"] = experiment_config_to_json(config);
    out.json("summary.json", out.result.summary);
    return std::move(out.result);
}

} // namespace rdsrnn
