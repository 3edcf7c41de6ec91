#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace gse {

/// Seedable counter-based generator. Draw k of stream (seed, stream) is a pure
/// function of (seed, stream, k), so results are reproducible bit-for-bit and
/// independent streams can be split off without sharing state.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ 0x6a09e667f3bcc908ULL) ^ mix(stream + 0xbb67ae8584caa73bULL)), seed_(seed), stream_(stream) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

    /// Independent child stream; does not advance this generator.
    [[nodiscard]] RandomSource fork(std::uint64_t child) const noexcept {
        return RandomSource(seed_, mix(stream_ * 0x9e3779b97f4a7c15ULL + child + 1));
    }

    std::uint64_t next_u64() noexcept { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; one draw consumes two counters.
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    void fill_normal(std::span<double> out) noexcept {
        for (auto& v : out) v = normal();
    }

private:
    // SplitMix64 finalizer.
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace gse
