#pragma once

#include <Eigen/Core>

namespace rdsrnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct PowerIterationOptions {
    double relative_tolerance = 1e-12;
    int max_iterations = 10000;
};

/// Largest singular value, by power iteration on AᵀA.
double spectral_norm(const Matrix& a, PowerIterationOptions options = {});

/// Largest eigenvalue modulus.
double spectral_radius(const Matrix& a);

/// Symmetric square-root factor L with L·Lᵀ = S for a PSD matrix S.
/// Negative eigenvalues above -1e-10·‖S‖ are clamped to zero.
Matrix psd_factor(const Matrix& s);

bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);

} // namespace rdsrnn
