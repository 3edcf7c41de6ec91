#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gse/error.hpp"

namespace gse {

/// Fixed-rate sample buffer.
struct Signal {
    std::vector<double> samples;
    int sample_rate = 16000;

    Signal() = default;
    Signal(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] std::span<const double> view() const noexcept { return samples; }
    [[nodiscard]] std::span<double> view() noexcept { return samples; }
    [[nodiscard]] double duration_s() const noexcept {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

/// Current iterate of the reverse process together with its diffusion time.
struct DiffusionState {
    std::vector<double> x;
    double t = 0.0;
};

[[nodiscard]] inline double energy(std::span<const double> v) noexcept {
    return std::transform_reduce(v.begin(), v.end(), 0.0, std::plus<>{}, [](double a) { return a * a; });
}

[[nodiscard]] inline double norm2(std::span<const double> v) noexcept { return std::sqrt(energy(v)); }

[[nodiscard]] inline double distance2(std::span<const double> a, std::span<const double> b) {
    detail::require_same_length(a.size(), b.size(), "distance2");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

[[nodiscard]] inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

[[nodiscard]] inline double max_abs(std::span<const double> v) noexcept {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}

inline void validate_signal(std::span<const double> v, const char* what) {
    if (v.empty()) throw DimensionError(std::string(what) + ": empty signal");
    if (!all_finite(v)) throw DomainError(std::string(what) + ": non-finite sample");
}

}  // namespace gse
