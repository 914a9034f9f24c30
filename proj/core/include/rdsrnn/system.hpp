#pragma once

#include "rdsrnn/linalg.hpp"
#include "rdsrnn/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rdsrnn {

/// x ↦ matrix·x + offset.
struct AffineMap {
    Matrix matrix;
    Vector offset;

    Index dimension() const { return offset.size(); }
    Vector apply(const Vector& x) const;
    void apply_into(const Vector& x, Vector& out) const;
    void validate() const;
};

/// Finite set of affine maps, each picked independently with its probability.
struct MapEnsemble {
    std::vector<AffineMap> maps;
    std::vector<double> probabilities;

    std::size_t size() const { return maps.size(); }
    Index dimension() const;
    void validate() const;
};

/// Throws ConfigurationError unless the entries are in [0,1] and sum to 1
/// within 1e-12.
void validate_probabilities(std::span<const double> probabilities);

/// Inverse-CDF categorical draw with left-closed bins: the smallest i whose
/// cumulative probability exceeds u.
std::size_t sample_map_index(std::span<const double> probabilities, double u);

struct CategoricalInput {
    std::vector<double> probabilities;
};

struct GaussianInput {
    Vector mean;
    Matrix covariance;
};

/// U_t = transition·U_{t-1} + U'_t with Gaussian innovations U'_t and a
/// Gaussian U_0.
struct Ar1Input {
    Matrix transition;
    GaussianInput innovation;
    Vector initial_mean;
    Matrix initial_covariance;
};

struct InputProcess {
    std::variant<CategoricalInput, GaussianInput, Ar1Input> kind;

    Index dimension() const;
    void validate() const;
};

/// Iterated function system: the realised map index is the random input.
struct IfsSystem {
    MapEnsemble ensemble;
};

/// Same dynamics as an IFS, viewed as a switched system whose categorical
/// switching signal is an external input (fed to networks as one-hot).
struct SwitchedAffineSystem {
    MapEnsemble ensemble;
};

/// x_t = a·x_{t-1} + b·u_t.
struct LinearSystem {
    Matrix a;
    Matrix b;
    InputProcess input;
};

/// Scalar discrete Ornstein-Uhlenbeck recursion
/// x_t = rho + alpha·(x_{t-1} - rho) + u_t with u_t ~ N(0, sigma²).
struct OuSystem {
    double rho = 0.0;
    double alpha = 0.0;
    double sigma = 1.0;

    double apply(double x, double u) const { return rho + alpha * (x - rho) + u; }
};

struct SystemSpec {
    std::variant<IfsSystem, SwitchedAffineSystem, LinearSystem, OuSystem> kind;

    Index state_dimension() const;
    /// Width of the input vector; categorical inputs report 1 (the index).
    Index input_dimension() const;
    /// Number of categories for ifs/switched systems, 0 otherwise.
    std::size_t category_count() const;
    bool categorical() const { return category_count() > 0; }
    std::string kind_name() const;
    void validate() const;
};

/// Realised input: a map index for categorical systems, a vector otherwise.
using Input = std::variant<std::size_t, Vector>;

/// Numeric view of an input, as written to CSV: the index, or the vector.
Vector input_values(const Input& u);

Vector step(const SystemSpec& spec, const Vector& x, const Input& u);
/// As step(), writing into out. out must not alias x.
void step_into(const SystemSpec& spec, const Vector& x, const Input& u, Vector& out);

/// Draws the input sequence U_1, U_2, ... for a system from one RNG stream.
class InputSampler {
public:
    InputSampler(const SystemSpec& spec, Pcg32 rng);

    Input next();

private:
    const SystemSpec* spec_;
    Pcg32 rng_;
    Matrix innovation_factor_;
    Vector innovation_mean_;
    Vector ar1_state_;
};

struct Trajectory {
    std::vector<Vector> states;  // t = 0..T
    std::vector<Input> inputs;   // t = 1..T, inputs[t-1] drives states[t]
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::size_t horizon() const { return inputs.size(); }
};

struct TrajectoryBatch {
    std::vector<Trajectory> trajectories;

    std::size_t size() const { return trajectories.size(); }
    bool empty() const { return trajectories.empty(); }
};

/// Deterministic given (spec, x0, horizon, seed, stream).
Trajectory simulate(const SystemSpec& spec, const Vector& x0, std::size_t horizon,
                    std::uint64_t seed, std::uint64_t stream = 0);

/// Trajectory n uses stream n, so it is identical whatever the batch size.
TrajectoryBatch simulate_batch(const SystemSpec& spec, const Vector& x0, std::size_t horizon,
                               std::uint64_t seed, std::size_t count, unsigned threads = 1);

/// y_k = M_1 ∘ M_2 ∘ ... ∘ M_k (x0) for k = 1..n, where M_j is the map
/// realised by the j-th input draw. Later draws are applied first, which
/// is the backward (pullback) iteration.
std::vector<Vector> backward_compose(const SystemSpec& spec, const Vector& x0, std::size_t n,
                                     std::uint64_t seed, std::uint64_t stream = 0);

struct StackedLinear {
    Matrix transition;  // [[A, B·G], [0, G]]
    Matrix input;       // [[B, 0], [0, I]], acting on the duplicated innovation (u', u')
};

/// Augments x_t = A x_{t-1} + B u_t with the input recursion u_t = G u_{t-1} + u'_t
/// into a single linear system on (x, u) driven by u'.
StackedLinear stack_linear(const Matrix& a, const Matrix& b, const Matrix& g);

} // namespace rdsrnn
