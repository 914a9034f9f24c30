#include "rdsrnn/presets.hpp"

#include "rdsrnn/error.hpp"

#include <string>

namespace rdsrnn::presets {

namespace {

AffineMap affine(double a11, double a12, double a21, double a22, double b1, double b2) {
    AffineMap m;
    m.matrix.resize(2, 2);
    m.matrix << a11, a12, a21, a22;
    m.offset.resize(2);
    m.offset << b1, b2;
    return m;
}

} // namespace

MapEnsemble barnsley_fern() {
    MapEnsemble e;
    e.maps = {
        affine(0.00, 0.00, 0.00, 0.16, 0.00, 0.00),
        affine(0.85, 0.04, -0.04, 0.85, 0.00, 1.60),
        affine(0.20, -0.26, 0.23, 0.22, 0.00, 1.60),
        affine(-0.15, 0.28, 0.26, 0.24, 0.00, 0.44),
    };
    e.probabilities = {0.01, 0.85, 0.07, 0.07};
    return e;
}

MapEnsemble simplified_fern() {
    MapEnsemble e;
    e.maps = {
        affine(0.40, -0.3733, 0.060, 0.60, 0.3533, 0.00),
        affine(-0.80, -0.1867, 0.1371, 0.80, 1.10, 0.10),
    };
    e.probabilities = {0.2993, 0.7007};
    return e;
}

MapEnsemble two_map_average_contraction(const Vector& offset1, const Vector& offset2) {
    MapEnsemble e;
    e.maps = {
        affine(10.0 / 9.0, 0.0, 0.0, 0.5, offset1(0), offset1(1)),
        affine(0.5, 0.0, 0.0, 10.0 / 9.0, offset2(0), offset2(1)),
    };
    e.probabilities = {0.5, 0.5};
    return e;
}

SystemSpec barnsley_fern_system() { return SystemSpec{IfsSystem{barnsley_fern()}}; }

SystemSpec simplified_fern_system() { return SystemSpec{SwitchedAffineSystem{simplified_fern()}}; }

SystemSpec ou_system(double rho, double alpha, double sigma) {
    return SystemSpec{OuSystem{rho, alpha, sigma}};
}

MapEnsemble ensemble_by_name(std::string_view name) {
    if (name == "barnsley-fern") return barnsley_fern();
    if (name == "simplified-fern") return simplified_fern();
    if (name == "two-map") return two_map_average_contraction();
    throw ConfigurationError("unknown ensemble preset: " + std::string(name));
}

} // namespace rdsrnn::presets
