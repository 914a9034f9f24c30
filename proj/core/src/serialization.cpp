#include "rdsrnn/serialization.hpp"

#include "rdsrnn/csv.hpp"
#include "rdsrnn/error.hpp"
#include "rdsrnn/presets.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace rdsrnn {

namespace {

const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) throw ConfigurationError(fmt::format("expected an object holding '{}'", key));
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigurationError(fmt::format("missing key '{}'", key));
    return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigurationError(fmt::format("key '{}': {}", key, e.what()));
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return get<T>(j, key);
}

double number(const Json& j) {
    if (!j.is_number()) throw ConfigurationError(fmt::format("expected a number, got {}", j.dump()));
    return j.get<double>();
}

} // namespace

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    if (!j.is_array()) throw ConfigurationError("matrix must be an array of rows");
    if (j.empty()) return Matrix(0, 0);
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Json& row = j[i];
        if (!row.is_array() || row.size() != cols) throw ConfigurationError("matrix rows must have equal length");
        for (std::size_t k = 0; k < cols; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = number(row[k]);
    }
    return m;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (!j.is_array()) throw ConfigurationError("vector must be an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i]);
    return v;
}

Json ensemble_to_json(const MapEnsemble& ensemble) {
    Json maps = Json::array();
    for (const AffineMap& map : ensemble.maps)
        maps.push_back({{"matrix", matrix_to_json(map.matrix)}, {"offset", vector_to_json(map.offset)}});
    return {{"maps", maps}, {"probabilities", ensemble.probabilities}};
}

MapEnsemble ensemble_from_json(const Json& j) {
    if (j.contains("preset")) return presets::ensemble_by_name(get<std::string>(j, "preset"));
    MapEnsemble ensemble;
    for (const Json& map : field(j, "maps"))
        ensemble.maps.push_back({matrix_from_json(field(map, "matrix")), vector_from_json(field(map, "offset"))});
    ensemble.probabilities = get<std::vector<double>>(j, "probabilities");
    ensemble.validate();
    return ensemble;
}

namespace {

Json gaussian_to_json(const GaussianInput& g) {
    return {{"mean", vector_to_json(g.mean)}, {"covariance", matrix_to_json(g.covariance)}};
}

GaussianInput gaussian_from_json(const Json& j) {
    return {vector_from_json(field(j, "mean")), matrix_from_json(field(j, "covariance"))};
}

Json input_to_json(const InputProcess& input) {
    return std::visit(
        [](const auto& p) -> Json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, CategoricalInput>) {
                return {{"kind", "categorical"}, {"probabilities", p.probabilities}};
            } else if constexpr (std::is_same_v<T, GaussianInput>) {
                Json out = gaussian_to_json(p);
                out["kind"] = "gaussian";
                return out;
            } else {
                return {{"kind", "ar1"},
                        {"transition", matrix_to_json(p.transition)},
                        {"innovation", gaussian_to_json(p.innovation)},
                        {"initial_mean", vector_to_json(p.initial_mean)},
                        {"initial_covariance", matrix_to_json(p.initial_covariance)}};
            }
        },
        input.kind);
}

InputProcess input_from_json(const Json& j) {
    const auto kind = get<std::string>(j, "kind");
    if (kind == "categorical") return {CategoricalInput{get<std::vector<double>>(j, "probabilities")}};
    if (kind == "gaussian") return {gaussian_from_json(j)};
    if (kind == "ar1") {
        return {Ar1Input{matrix_from_json(field(j, "transition")), gaussian_from_json(field(j, "innovation")),
                         vector_from_json(field(j, "initial_mean")),
                         matrix_from_json(field(j, "initial_covariance"))}};
    }
    throw ConfigurationError(fmt::format("unknown input process '{}'", kind));
}

} // namespace

Json system_to_json(const SystemSpec& spec) {
    return std::visit(
        [](const auto& s) -> Json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, IfsSystem> || std::is_same_v<T, SwitchedAffineSystem>) {
                Json out = ensemble_to_json(s.ensemble);
                out["kind"] = std::is_same_v<T, IfsSystem> ? "ifs" : "switched-affine";
                return out;
            } else if constexpr (std::is_same_v<T, LinearSystem>) {
                return {{"kind", "linear"},
                        {"a", matrix_to_json(s.a)},
                        {"b", matrix_to_json(s.b)},
                        {"input", input_to_json(s.input)}};
            } else {
                return {{"kind", "ou"}, {"rho", s.rho}, {"alpha", s.alpha}, {"sigma", s.sigma}};
            }
        },
        spec.kind);
}

SystemSpec system_from_json(const Json& j) {
    const auto kind = get<std::string>(j, "kind");
    SystemSpec spec;
    if (kind == "ifs") {
        spec.kind = IfsSystem{ensemble_from_json(j)};
    } else if (kind == "switched-affine") {
        spec.kind = SwitchedAffineSystem{ensemble_from_json(j)};
    } else if (kind == "linear") {
        spec.kind = LinearSystem{matrix_from_json(field(j, "a")), matrix_from_json(field(j, "b")),
                                 input_from_json(field(j, "input"))};
    } else if (kind == "ou") {
        spec.kind = OuSystem{get<double>(j, "rho"), get<double>(j, "alpha"), get_or<double>(j, "sigma", 1.0)};
    } else {
        throw ConfigurationError(fmt::format("unknown system kind '{}'", kind));
    }
    spec.validate();
    return spec;
}

Json network_to_json(const Network& net, const std::optional<NetworkState>& state) {
    net.validate();
    Json layers = Json::array();
    for (const AffineLayer& layer : net.layers)
        layers.push_back({{"weight", matrix_to_json(layer.weight)}, {"bias", vector_to_json(layer.bias)}});
    Json feedback = Json::array();
    for (const Matrix& phi : net.feedback) feedback.push_back(matrix_to_json(phi));
    Json out = {{"format", "rdsrnn-network"},
                {"version", kNetworkFormatVersion},
                {"topology",
                 {{"widths", net.topology.widths},
                  {"feedback", std::string(to_string(net.topology.feedback))},
                  {"memory_horizon", net.topology.memory_horizon}}},
                {"layers", layers},
                {"feedback", feedback}};
    if (net.topology.feedback == FeedbackKind::memory_bank) out["memory_offset"] = vector_to_json(net.memory_offset);
    if (state) out["state"] = vector_to_json(state->feedback);
    return out;
}

Network network_from_json(const Json& j) {
    if (get_or<std::string>(j, "format", "") != "rdsrnn-network")
        throw ConfigurationError("not an rdsrnn network document");
    const int version = get<int>(j, "version");
    if (version != kNetworkFormatVersion)
        throw ConfigurationError(fmt::format("unsupported network format version {}", version));
    Network net;
    const Json& topo = field(j, "topology");
    net.topology.widths = get<std::vector<Index>>(topo, "widths");
    net.topology.feedback = feedback_kind_from_string(get<std::string>(topo, "feedback"));
    net.topology.memory_horizon = get_or<std::size_t>(topo, "memory_horizon", 0);
    for (const Json& layer : field(j, "layers"))
        net.layers.push_back({matrix_from_json(field(layer, "weight")), vector_from_json(field(layer, "bias"))});
    for (const Json& phi : field(j, "feedback")) net.feedback.push_back(matrix_from_json(phi));
    if (j.contains("memory_offset")) net.memory_offset = vector_from_json(j.at("memory_offset"));
    net.validate();
    return net;
}

std::optional<NetworkState> network_state_from_json(const Json& j) {
    if (!j.contains("state")) return std::nullopt;
    return NetworkState{vector_from_json(j.at("state"))};
}

Json contraction_report_to_json(const ContractionReport& report) {
    Json windows = Json::array();
    for (const WindowBound& w : report.window_bounds) windows.push_back({{"k", w.k}, {"bound", w.bound}});
    const DecayFit& f = report.fit;
    return {{"method", report.method},
            {"p", report.p},
            {"window_bounds", windows},
            {"fit",
             {{"contractive", f.contractive},
              {"c", f.c},
              {"lambda", f.lambda},
              {"slope", f.slope},
              {"intercept", f.intercept},
              {"r_squared", f.r_squared}}},
            {"non_contractive", report.non_contractive()}};
}

ContractionReport contraction_report_from_json(const Json& j) {
    ContractionReport report;
    report.method = get<std::string>(j, "method");
    report.p = get<double>(j, "p");
    for (const Json& w : field(j, "window_bounds"))
        report.window_bounds.push_back({get<std::size_t>(w, "k"), get<double>(w, "bound")});
    const Json& f = field(j, "fit");
    report.fit = {get<bool>(f, "contractive"), get<double>(f, "c"),         get<double>(f, "lambda"),
                  get<double>(f, "slope"),     get<double>(f, "intercept"), get<double>(f, "r_squared")};
    return report;
}

Json train_config_to_json(const TrainConfig& config) {
    Json out = {{"learning_rate", config.learning_rate},
                {"batch_size", config.batch_size},
                {"epochs", config.epochs},
                {"optimizer", std::string(to_string(config.optimizer))},
                {"adam", {{"beta1", config.adam.beta1}, {"beta2", config.adam.beta2}, {"epsilon", config.adam.epsilon}}},
                {"truncation", nullptr},
                {"seed", config.seed},
                {"gradient_clip", nullptr},
                {"init", std::string(to_string(config.init))},
                {"threads", config.threads}};
    if (config.truncation) out["truncation"] = *config.truncation;
    if (config.gradient_clip) out["gradient_clip"] = *config.gradient_clip;
    return out;
}

TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    if (!j.is_object()) throw ConfigurationError("train section must be an object");
    c.optimizer = optimizer_from_string(get_or<std::string>(j, "optimizer", std::string(to_string(c.optimizer))));
    c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate);
    c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size);
    c.epochs = get_or<std::size_t>(j, "epochs", c.epochs);
    if (j.contains("adam")) {
        const Json& a = j.at("adam");
        c.adam.beta1 = get_or<double>(a, "beta1", c.adam.beta1);
        c.adam.beta2 = get_or<double>(a, "beta2", c.adam.beta2);
        c.adam.epsilon = get_or<double>(a, "epsilon", c.adam.epsilon);
    }
    if (j.contains("truncation") && !j.at("truncation").is_null()) {
        const Json& t = j.at("truncation");
        if (!(t.is_string() && t.get<std::string>() == "full")) c.truncation = get<std::size_t>(j, "truncation");
    }
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("gradient_clip") && !j.at("gradient_clip").is_null()) c.gradient_clip = get<double>(j, "gradient_clip");
    c.init = init_policy_from_string(get_or<std::string>(j, "init", std::string(to_string(c.init))));
    c.threads = get_or<unsigned>(j, "threads", c.threads);
    c.validate();
    return c;
}

Json train_report_to_json(const TrainReport& report) {
    Json out = {{"loss_history", report.loss_history},
                {"wall_time_seconds", report.wall_time_seconds},
                {"init", std::string(to_string(report.init))},
                {"stationary_start", nullptr},
                {"network", network_to_json(report.network)}};
    if (report.stationary_start) out["stationary_start"] = vector_to_json(*report.stationary_start);
    return out;
}

TrainReport train_report_from_json(const Json& j) {
    TrainReport report;
    report.loss_history = get<std::vector<double>>(j, "loss_history");
    report.wall_time_seconds = get<double>(j, "wall_time_seconds");
    report.init = init_policy_from_string(get<std::string>(j, "init"));
    if (j.contains("stationary_start") && !j.at("stationary_start").is_null())
        report.stationary_start = vector_from_json(j.at("stationary_start"));
    report.network = network_from_json(field(j, "network"));
    return report;
}

Json lgssm_to_json(const LgssmModel& model) {
    return {{"g", matrix_to_json(model.g)},         {"h", matrix_to_json(model.h)},
            {"q", matrix_to_json(model.q)},         {"r", matrix_to_json(model.r)},
            {"mean0", vector_to_json(model.mean0)}, {"cov0", matrix_to_json(model.cov0)}};
}

LgssmModel lgssm_from_json(const Json& j) {
    LgssmModel model{matrix_from_json(field(j, "g")), matrix_from_json(field(j, "h")),
                     matrix_from_json(field(j, "q")), matrix_from_json(field(j, "r")),
                     vector_from_json(field(j, "mean0")), matrix_from_json(field(j, "cov0"))};
    model.validate();
    return model;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return Json::parse(buffer.str());
    } catch (const Json::parse_error& e) {
        throw ConfigurationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

} // namespace rdsrnn
