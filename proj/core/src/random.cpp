#include "rdsrnn/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <bit>

namespace rdsrnn {

namespace {
constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
constexpr double kTwoPowMinus53 = 0x1.0p-53;
} // namespace

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept
    : increment_((stream << 1u) | 1u) {
    (*this)();
    state_ += seed;
    (*this)();
}

Pcg32::result_type Pcg32::operator()() noexcept {
    const std::uint64_t old = state_;
    state_ = old * kMultiplier + increment_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<int>(old >> 59u);
    return std::rotr(xorshifted, rot);
}

std::uint64_t Pcg32::next_u64() noexcept {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (hi << 32u) | lo;
}

double Pcg32::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11u) * kTwoPowMinus53;
}

double Pcg32::uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11u) + 0.5) * kTwoPowMinus53;
}

double Pcg32::normal() noexcept { return normal_quantile(uniform_open()); }

void Pcg32::discard(std::uint64_t n) noexcept {
    for (std::uint64_t i = 0; i < n; ++i) (*this)();
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27u)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31u);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) noexcept {
    return mix64(mix64(seed) ^ purpose);
}

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

} // namespace rdsrnn
