#pragma once

#include <cstdint>
#include <limits>

namespace rdsrnn {

/// PCG32 (XSH-RR 64/32) with an explicit stream selector.
///
/// Every (seed, stream) pair gives an independent sequence, so trajectory
/// n of a batch is drawn from stream n and does not depend on how many
/// other trajectories are simulated alongside it.
class Pcg32 {
public:
    using result_type = std::uint32_t;

    Pcg32(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform on (0, 1): the midpoint of a 2^-53 grid cell, never 0 or 1.
    double uniform_open() noexcept;

    /// Standard normal draw by inversion of the normal CDF on uniform_open().
    double normal() noexcept;

    void discard(std::uint64_t n) noexcept;

private:
    std::uint64_t state_ = 0;
    std::uint64_t increment_ = 0;
};

/// splitmix64 finaliser; used to derive independent seeds for sub-tasks.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for a named purpose (training data, test data, init, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) noexcept;

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

// Purpose tags for derive_seed.
namespace seed_purpose {
inline constexpr std::uint64_t train_data = 0x7472'6169'6e00ULL;
inline constexpr std::uint64_t test_data = 0x7465'7374'0000ULL;
inline constexpr std::uint64_t init = 0x696e'6974'0000ULL;
inline constexpr std::uint64_t shuffle = 0x7368'7566'0000ULL;
inline constexpr std::uint64_t calibration = 0x6361'6c69'6200ULL;
inline constexpr std::uint64_t initial_state = 0x7830'0000'0000ULL;
} // namespace seed_purpose

} // namespace rdsrnn
