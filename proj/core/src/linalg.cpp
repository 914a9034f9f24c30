#include "rdsrnn/linalg.hpp"

#include <Eigen/Eigenvalues>

#include "rdsrnn/error.hpp"

#include <cmath>

namespace rdsrnn {

namespace {

// Power iteration for the dominant eigenvalue of the PSD matrix AᵀA from a
// given start vector. Returns the Rayleigh quotient at convergence.
double gram_power_iteration(const Matrix& a, Vector v, const PowerIterationOptions& options) {
    const Matrix gram = a.transpose() * a;
    double norm = v.norm();
    if (norm == 0.0) return 0.0;
    v /= norm;
    double lambda = v.dot(gram * v);
    for (int it = 0; it < options.max_iterations; ++it) {
        Vector w = gram * v;
        norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = v.dot(gram * v);
        if (std::abs(next - lambda) <= options.relative_tolerance * std::abs(next)) {
            return next;
        }
        lambda = next;
    }
    return lambda;
}

} // namespace

double spectral_norm(const Matrix& a, PowerIterationOptions options) {
    if (a.size() == 0) return 0.0;
    const Index n = a.cols();
    // Deterministic start with distinct components so it is not orthogonal
    // to the dominant singular vector for the usual structured matrices.
    Vector start(n);
    for (Index i = 0; i < n; ++i) start(i) = 1.0 + 0.1 * static_cast<double>(i) / static_cast<double>(n);
    double lambda = gram_power_iteration(a, start, options);
    if (lambda == 0.0 && a.cwiseAbs().maxCoeff() > 0.0) {
        // Start vector fell in the null space; try coordinate directions.
        for (Index j = 0; j < n && lambda == 0.0; ++j) {
            lambda = gram_power_iteration(a, Vector::Unit(n, j), options);
        }
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double spectral_radius(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> solver(a, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix psd_factor(const Matrix& s) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (s + s.transpose()));
    Vector values = solver.eigenvalues();
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    for (Index i = 0; i < values.size(); ++i) {
        if (values(i) < -1e-10 * scale) {
            throw ConfigurationError("covariance matrix is not positive semi-definite");
        }
        values(i) = std::sqrt(std::max(values(i), 0.0));
    }
    return solver.eigenvectors() * values.asDiagonal();
}

bool all_finite(const Matrix& a) { return a.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

} // namespace rdsrnn
