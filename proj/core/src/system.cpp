#include "rdsrnn/system.hpp"

#include "rdsrnn/error.hpp"
#include "rdsrnn/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdsrnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

void check_square(const Matrix& m, Index n, const char* what) {
    if (m.rows() != n || m.cols() != n) {
        throw ConfigurationError(fmt::format("{} must be {}x{}, got {}x{}", what, n, n, m.rows(), m.cols()));
    }
    if (!m.allFinite()) throw ConfigurationError(fmt::format("{} has non-finite entries", what));
}

void check_symmetric_psd(const Matrix& m, const char* what) {
    if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
        throw ConfigurationError(fmt::format("{} must be symmetric", what));
    }
    psd_factor(m);
}

void validate_gaussian(const GaussianInput& g, const char* what) {
    if (!g.mean.allFinite()) throw ConfigurationError(fmt::format("{} mean is not finite", what));
    check_square(g.covariance, g.mean.size(), what);
    check_symmetric_psd(g.covariance, what);
}

std::size_t expect_index(const Input& u) {
    if (const auto* index = std::get_if<std::size_t>(&u)) return *index;
    throw InputError("categorical system expects a map index as input");
}

const Vector& expect_vector(const Input& u, Index dimension) {
    const auto* v = std::get_if<Vector>(&u);
    if (v == nullptr) throw InputError("system expects a real input vector");
    if (v->size() != dimension) {
        throw InputError(fmt::format("input has dimension {}, expected {}", v->size(), dimension));
    }
    return *v;
}

const MapEnsemble* ensemble_of(const SystemSpec& spec) {
    if (const auto* ifs = std::get_if<IfsSystem>(&spec.kind)) return &ifs->ensemble;
    if (const auto* sw = std::get_if<SwitchedAffineSystem>(&spec.kind)) return &sw->ensemble;
    return nullptr;
}

Vector draw_gaussian(Pcg32& rng, const Vector& mean, const Matrix& factor) {
    Vector z(factor.cols());
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean + factor * z;
}

} // namespace

// ---------------------------------------------------------------------------
// AffineMap / MapEnsemble

Vector AffineMap::apply(const Vector& x) const { return matrix * x + offset; }

void AffineMap::apply_into(const Vector& x, Vector& out) const {
    out.noalias() = matrix * x;
    out += offset;
}

void AffineMap::validate() const {
    check_square(matrix, offset.size(), "affine map matrix");
    if (!offset.allFinite()) throw ConfigurationError("affine map offset has non-finite entries");
}

Index MapEnsemble::dimension() const { return maps.empty() ? 0 : maps.front().dimension(); }

void MapEnsemble::validate() const {
    if (maps.empty()) throw ConfigurationError("map ensemble is empty");
    if (maps.size() != probabilities.size()) {
        throw ConfigurationError(fmt::format("map ensemble has {} maps but {} probabilities",
                                             maps.size(), probabilities.size()));
    }
    for (const auto& m : maps) {
        m.validate();
        if (m.dimension() != dimension()) throw ConfigurationError("map ensemble dimensions disagree");
    }
    validate_probabilities(probabilities);
}

void validate_probabilities(std::span<const double> probabilities) {
    if (probabilities.empty()) throw ConfigurationError("probability vector is empty");
    for (double p : probabilities) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw ConfigurationError(fmt::format("probability {} outside [0, 1]", p));
        }
    }
    const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) {
        throw ConfigurationError(fmt::format("probabilities sum to {:.17g}, not 1", total));
    }
}

std::size_t sample_map_index(std::span<const double> probabilities, double u) {
    validate_probabilities(probabilities);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        cumulative += probabilities[i];
        if (cumulative > u) return i;
    }
    // Rounding left the total just below u; fall back to the last bin with mass.
    for (std::size_t i = probabilities.size(); i-- > 0;) {
        if (probabilities[i] > 0.0) return i;
    }
    return probabilities.size() - 1;
}

// ---------------------------------------------------------------------------
// InputProcess / SystemSpec

Index InputProcess::dimension() const {
    return std::visit(Overloaded{
                          [](const CategoricalInput&) -> Index { return 1; },
                          [](const GaussianInput& g) -> Index { return g.mean.size(); },
                          [](const Ar1Input& a) -> Index { return a.initial_mean.size(); },
                      },
                      kind);
}

void InputProcess::validate() const {
    std::visit(Overloaded{
                   [](const CategoricalInput& c) { validate_probabilities(c.probabilities); },
                   [](const GaussianInput& g) { validate_gaussian(g, "gaussian input"); },
                   [](const Ar1Input& a) {
                       const Index d = a.initial_mean.size();
                       if (d == 0) throw ConfigurationError("ar1 input has zero dimension");
                       check_square(a.transition, d, "ar1 transition");
                       validate_gaussian(a.innovation, "ar1 innovation");
                       if (a.innovation.mean.size() != d) {
                           throw ConfigurationError("ar1 innovation dimension mismatch");
                       }
                       validate_gaussian(GaussianInput{a.initial_mean, a.initial_covariance},
                                         "ar1 initial distribution");
                   },
               },
               kind);
}

Index SystemSpec::state_dimension() const {
    return std::visit(Overloaded{
                          [](const IfsSystem& s) { return s.ensemble.dimension(); },
                          [](const SwitchedAffineSystem& s) { return s.ensemble.dimension(); },
                          [](const LinearSystem& s) { return s.a.rows(); },
                          [](const OuSystem&) -> Index { return 1; },
                      },
                      kind);
}

Index SystemSpec::input_dimension() const {
    return std::visit(Overloaded{
                          [](const IfsSystem&) -> Index { return 1; },
                          [](const SwitchedAffineSystem&) -> Index { return 1; },
                          [](const LinearSystem& s) { return s.input.dimension(); },
                          [](const OuSystem&) -> Index { return 1; },
                      },
                      kind);
}

std::size_t SystemSpec::category_count() const {
    const MapEnsemble* e = ensemble_of(*this);
    return e == nullptr ? 0 : e->size();
}

std::string SystemSpec::kind_name() const {
    return std::visit(Overloaded{
                          [](const IfsSystem&) { return std::string("ifs"); },
                          [](const SwitchedAffineSystem&) { return std::string("switched-affine"); },
                          [](const LinearSystem&) { return std::string("linear"); },
                          [](const OuSystem&) { return std::string("ou"); },
                      },
                      kind);
}

void SystemSpec::validate() const {
    std::visit(Overloaded{
                   [](const IfsSystem& s) { s.ensemble.validate(); },
                   [](const SwitchedAffineSystem& s) { s.ensemble.validate(); },
                   [](const LinearSystem& s) {
                       check_square(s.a, s.a.rows(), "linear system A");
                       if (s.a.rows() == 0) throw ConfigurationError("linear system has zero state dimension");
                       s.input.validate();
                       if (std::holds_alternative<CategoricalInput>(s.input.kind)) {
                           throw ConfigurationError("linear system needs a real-valued input process");
                       }
                       if (s.b.rows() != s.a.rows() || s.b.cols() != s.input.dimension()) {
                           throw ConfigurationError(fmt::format("linear system B must be {}x{}, got {}x{}",
                                                                s.a.rows(), s.input.dimension(), s.b.rows(),
                                                                s.b.cols()));
                       }
                       if (!s.b.allFinite()) throw ConfigurationError("linear system B is not finite");
                   },
                   [](const OuSystem& s) {
                       if (!std::isfinite(s.rho) || !std::isfinite(s.alpha) || !std::isfinite(s.sigma) ||
                           s.sigma < 0.0) {
                           throw ConfigurationError("ou parameters must be finite with sigma >= 0");
                       }
                   },
               },
               kind);
}

Vector input_values(const Input& u) {
    if (const auto* index = std::get_if<std::size_t>(&u)) {
        return Vector::Constant(1, static_cast<double>(*index));
    }
    return std::get<Vector>(u);
}

// ---------------------------------------------------------------------------
// Stepping and simulation

void step_into(const SystemSpec& spec, const Vector& x, const Input& u, Vector& out) {
    if (x.size() != spec.state_dimension()) {
        throw InputError(fmt::format("state has dimension {}, expected {}", x.size(), spec.state_dimension()));
    }
    if (const MapEnsemble* ensemble = ensemble_of(spec)) {
        const std::size_t index = expect_index(u);
        if (index >= ensemble->size()) {
            throw InputError(fmt::format("map index {} out of range for {} maps", index, ensemble->size()));
        }
        ensemble->maps[index].apply_into(x, out);
        return;
    }
    if (const auto* lin = std::get_if<LinearSystem>(&spec.kind)) {
        const Vector& v = expect_vector(u, lin->b.cols());
        out.noalias() = lin->a * x;
        out.noalias() += lin->b * v;
        return;
    }
    const auto& ou = std::get<OuSystem>(spec.kind);
    const Vector& v = expect_vector(u, 1);
    out.resize(1);
    out(0) = ou.apply(x(0), v(0));
}

Vector step(const SystemSpec& spec, const Vector& x, const Input& u) {
    Vector out(spec.state_dimension());
    step_into(spec, x, u, out);
    return out;
}

InputSampler::InputSampler(const SystemSpec& spec, Pcg32 rng) : spec_(&spec), rng_(rng) {
    if (const auto* lin = std::get_if<LinearSystem>(&spec.kind)) {
        if (const auto* g = std::get_if<GaussianInput>(&lin->input.kind)) {
            innovation_factor_ = psd_factor(g->covariance);
            innovation_mean_ = g->mean;
        } else if (const auto* a = std::get_if<Ar1Input>(&lin->input.kind)) {
            innovation_factor_ = psd_factor(a->innovation.covariance);
            innovation_mean_ = a->innovation.mean;
            ar1_state_ = draw_gaussian(rng_, a->initial_mean, psd_factor(a->initial_covariance));
        }
    }
}

Input InputSampler::next() {
    if (const MapEnsemble* ensemble = ensemble_of(*spec_)) {
        return sample_map_index(ensemble->probabilities, rng_.uniform());
    }
    if (const auto* ou = std::get_if<OuSystem>(&spec_->kind)) {
        return Vector::Constant(1, ou->sigma * rng_.normal());
    }
    const auto& lin = std::get<LinearSystem>(spec_->kind);
    Vector innovation = draw_gaussian(rng_, innovation_mean_, innovation_factor_);
    if (const auto* a = std::get_if<Ar1Input>(&lin.input.kind)) {
        ar1_state_ = a->transition * ar1_state_ + innovation;
        return ar1_state_;
    }
    return innovation;
}

Trajectory simulate(const SystemSpec& spec, const Vector& x0, std::size_t horizon, std::uint64_t seed,
                    std::uint64_t stream) {
    spec.validate();
    if (x0.size() != spec.state_dimension()) {
        throw InputError(fmt::format("initial state has dimension {}, expected {}", x0.size(),
                                     spec.state_dimension()));
    }
    Trajectory traj;
    traj.seed = seed;
    traj.stream = stream;
    traj.states.reserve(horizon + 1);
    traj.inputs.reserve(horizon);
    traj.states.push_back(x0);
    InputSampler sampler(spec, Pcg32(seed, stream));
    Vector next(x0.size());
    for (std::size_t t = 1; t <= horizon; ++t) {
        traj.inputs.push_back(sampler.next());
        step_into(spec, traj.states.back(), traj.inputs.back(), next);
        traj.states.push_back(next);
    }
    return traj;
}

TrajectoryBatch simulate_batch(const SystemSpec& spec, const Vector& x0, std::size_t horizon,
                               std::uint64_t seed, std::size_t count, unsigned threads) {
    TrajectoryBatch batch;
    batch.trajectories.resize(count);
    parallel_for(count, threads, [&](std::size_t n) {
        batch.trajectories[n] = simulate(spec, x0, horizon, seed, n);
    });
    return batch;
}

std::vector<Vector> backward_compose(const SystemSpec& spec, const Vector& x0, std::size_t n,
                                     std::uint64_t seed, std::uint64_t stream) {
    spec.validate();
    if (n == 0) throw InputError("backward_compose needs n >= 1");
    if (x0.size() != spec.state_dimension()) throw InputError("initial state dimension mismatch");
    InputSampler sampler(spec, Pcg32(seed, stream));
    std::vector<Input> draws;
    draws.reserve(n);
    for (std::size_t k = 0; k < n; ++k) draws.push_back(sampler.next());

    std::vector<Vector> out;
    out.reserve(n);
    Vector x(x0.size());
    Vector scratch(x0.size());
    for (std::size_t k = 1; k <= n; ++k) {
        x = x0;
        for (std::size_t j = k; j-- > 0;) {
            step_into(spec, x, draws[j], scratch);
            x.swap(scratch);
        }
        out.push_back(x);
    }
    return out;
}

StackedLinear stack_linear(const Matrix& a, const Matrix& b, const Matrix& g) {
    const Index dx = a.rows();
    const Index du = g.rows();
    if (a.cols() != dx || g.cols() != du || b.rows() != dx || b.cols() != du) {
        throw ConfigurationError(fmt::format("stack_linear: incompatible shapes A {}x{}, B {}x{}, G {}x{}",
                                             a.rows(), a.cols(), b.rows(), b.cols(), g.rows(), g.cols()));
    }
    StackedLinear s;
    s.transition = Matrix::Zero(dx + du, dx + du);
    s.transition.topLeftCorner(dx, dx) = a;
    s.transition.topRightCorner(dx, du) = b * g;
    s.transition.bottomRightCorner(du, du) = g;
    s.input = Matrix::Zero(dx + du, 2 * du);
    s.input.topLeftCorner(dx, du) = b;
    s.input.bottomRightCorner(du, du) = Matrix::Identity(du, du);
    return s;
}

} // namespace rdsrnn
