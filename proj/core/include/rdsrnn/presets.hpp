#pragma once

#include "rdsrnn/system.hpp"

#include <string_view>

namespace rdsrnn::presets {

/// Barnsley's four-map fern, p = (0.01, 0.85, 0.07, 0.07).
MapEnsemble barnsley_fern();

/// Two-map simplified fern, p = (0.2993, 0.7007).
MapEnsemble simplified_fern();

/// Two non-contractive diagonal maps diag(10/9, 1/2) and diag(1/2, 10/9)
/// with equal probabilities; contracting on average only over two steps.
MapEnsemble two_map_average_contraction(const Vector& offset1 = Vector::Zero(2),
                                        const Vector& offset2 = Vector::Zero(2));

SystemSpec barnsley_fern_system();
SystemSpec simplified_fern_system();
SystemSpec ou_system(double rho, double alpha, double sigma);

/// Looks up a named ensemble: "barnsley-fern", "simplified-fern", "two-map".
MapEnsemble ensemble_by_name(std::string_view name);

} // namespace rdsrnn::presets
