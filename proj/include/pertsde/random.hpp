#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pertsde {

/// SplitMix64 output finalizer (Steele, Lea & Flood).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream.
///
/// Draw j of stream (seed, index, domain) is
///   mix64(key + (j + 1) * 0x9e3779b97f4a7c15),
///   key = mix64(mix64(mix64(seed) + index) ^ domain).
/// Draws are a pure function of their coordinates, so any subset of paths can
/// be regenerated in any order on any thread.
class CounterStream {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    CounterStream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0) noexcept
        : key_(mix64(mix64(mix64(seed) + index) ^ domain)) {}

    std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ + (counter + 1) * kGolden);
    }

    /// Uniform on the open interval (0, 1): ((bits >> 11) + 0.5) * 2^-53.
    double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw j via Box-Muller on the uniform pair (2p, 2p + 1),
    /// p = j / 2; even j takes the cosine branch, odd j the sine branch.
    double normal(std::uint64_t j) const noexcept {
        const std::uint64_t pair = j / 2;
        const double u1 = uniform(2 * pair);
        const double u2 = uniform(2 * pair + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return (j % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
    }

private:
    std::uint64_t key_;
};

/// Stream domains keep independent uses of one (seed, index) pair apart.
namespace stream_domain {
inline constexpr std::uint64_t kBrownian = 0;
inline constexpr std::uint64_t kBridgeMax = 0x6272696467654d78ULL;
}  // namespace stream_domain

}  // namespace pertsde
