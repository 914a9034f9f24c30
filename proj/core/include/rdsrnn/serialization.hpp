#pragma once

#include "rdsrnn/contraction.hpp"
#include "rdsrnn/kalman.hpp"
#include "rdsrnn/linalg.hpp"
#include "rdsrnn/rnn.hpp"
#include "rdsrnn/system.hpp"
#include "rdsrnn/train.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace rdsrnn {

using Json = nlohmann::json;

inline constexpr int kNetworkFormatVersion = 1;

/// Matrices are arrays of rows; vectors are flat arrays.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// {"kind": "ifs" | "switched-affine", "maps": [...], "probabilities": [...]}
/// or {"kind": ..., "preset": "barnsley-fern" | "simplified-fern" | "two-map"};
/// {"kind": "linear", "a", "b", "input": {...}}; {"kind": "ou", "rho", "alpha", "sigma"}.
Json system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const Json& j);

Json ensemble_to_json(const MapEnsemble& ensemble);
MapEnsemble ensemble_from_json(const Json& j);

/// Versioned network document. Doubles are written in shortest
/// round-trip form, so reading back is bit-exact.
Json network_to_json(const Network& net, const std::optional<NetworkState>& state = std::nullopt);
Network network_from_json(const Json& j);
std::optional<NetworkState> network_state_from_json(const Json& j);

Json contraction_report_to_json(const ContractionReport& report);
ContractionReport contraction_report_from_json(const Json& j);

Json train_config_to_json(const TrainConfig& config);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const Json& j);

Json train_report_to_json(const TrainReport& report);
TrainReport train_report_from_json(const Json& j);

Json lgssm_to_json(const LgssmModel& model);
LgssmModel lgssm_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

} // namespace rdsrnn
