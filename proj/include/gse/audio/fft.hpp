#pragma once

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "gse/error.hpp"

namespace gse::audio {

[[nodiscard]] constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

[[nodiscard]] constexpr std::size_t next_power_of_two(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// In-place complex transform backed by FFTW. The inverse is scaled by 1/n.
inline void fft(std::span<std::complex<double>> a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n == 0) throw DimensionError("fft: empty input");
    auto* data = reinterpret_cast<fftw_complex*>(a.data());
    fftw_plan plan = nullptr;
    {
        // Only plan creation and destruction touch FFTW's shared planner state.
        const std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw NumericalError("fft: FFTW planning failed");
    fftw_execute(plan);
    {
        const std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : a) v *= inv;
    }
}

/// Transform of a real sequence, returning all n bins.
[[nodiscard]] inline std::vector<std::complex<double>> fft_real(std::span<const double> x) {
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft(a);
    return a;
}

/// Periodic Hann window.
[[nodiscard]] inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

/// Magnitudes of one analysis frame (frame_size / 2 + 1 bins).
struct SpectrumFrame {
    std::vector<double> magnitudes;
    std::size_t frame_size = 0;
    std::size_t hop = 0;
};

/// Short-time magnitude spectra over all full frames of x.
[[nodiscard]] inline std::vector<SpectrumFrame> stft_magnitudes(std::span<const double> x, std::size_t frame_size,
                                                                std::size_t hop, std::span<const double> window) {
    if (!is_power_of_two(frame_size)) throw DimensionError("stft: frame size must be a power of two");
    if (hop == 0) throw DomainError("stft: hop must be positive");
    if (window.size() != frame_size) throw DimensionError("stft: window length differs from frame size");
    if (x.size() < frame_size) throw DomainError("stft: signal shorter than one frame");
    const std::size_t frames = 1 + (x.size() - frame_size) / hop;
    std::vector<SpectrumFrame> out(frames);
    std::vector<std::complex<double>> buf(frame_size);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < frame_size; ++i) buf[i] = x[f * hop + i] * window[i];
        fft(buf);
        auto& frame = out[f];
        frame.frame_size = frame_size;
        frame.hop = hop;
        frame.magnitudes.resize(frame_size / 2 + 1);
        for (std::size_t k = 0; k <= frame_size / 2; ++k) frame.magnitudes[k] = std::abs(buf[k]);
    }
    return out;
}

}  // namespace gse::audio
