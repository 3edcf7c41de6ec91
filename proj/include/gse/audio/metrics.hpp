#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gse/audio/fft.hpp"
#include "gse/error.hpp"
#include "gse/signal.hpp"

namespace gse::audio {

inline constexpr double kMetricCapDb = 120.0;
inline constexpr std::size_t kLsdFrame = 512;
inline constexpr std::size_t kLsdHop = 256;
inline constexpr double kLsdFloor = 1e-8;

/// 10 log10(||ref||^2 / ||ref - est||^2), clamped to [-120, 120] dB.
[[nodiscard]] inline double sdr_db(std::span<const double> reference, std::span<const double> estimate) {
    gse::detail::require_same_length(reference.size(), estimate.size(), "sdr_db");
    const double ref = energy(reference);
    if (!(ref > 0.0)) throw DomainError("sdr_db: zero reference");
    double res = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference[i] - estimate[i];
        res += d * d;
    }
    if (!(res > 0.0)) return kMetricCapDb;
    return std::clamp(10.0 * std::log10(ref / res), -kMetricCapDb, kMetricCapDb);
}

/// SNR of a noisy observation against its clean component.
[[nodiscard]] inline double snr_db(std::span<const double> clean, std::span<const double> noisy) {
    return sdr_db(clean, noisy);
}

/// Mean over frames of the rms (over bins) difference of 20 log10(|S| + eps).
[[nodiscard]] inline double lsd(std::span<const double> reference, std::span<const double> estimate,
                                std::size_t frame_size = kLsdFrame, std::size_t hop = kLsdHop) {
    gse::detail::require_same_length(reference.size(), estimate.size(), "lsd");
    if (reference.size() < frame_size) throw DomainError("lsd: signals shorter than one frame");
    const auto window = hann_window(frame_size);
    const auto a = stft_magnitudes(reference, frame_size, hop, window);
    const auto b = stft_magnitudes(estimate, frame_size, hop, window);
    double total = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) {
        double acc = 0.0;
        const auto& ma = a[f].magnitudes;
        const auto& mb = b[f].magnitudes;
        for (std::size_t k = 0; k < ma.size(); ++k) {
            const double d = 20.0 * std::log10(ma[k] + kLsdFloor) - 20.0 * std::log10(mb[k] + kLsdFloor);
            acc += d * d;
        }
        total += std::sqrt(acc / static_cast<double>(ma.size()));
    }
    return total / static_cast<double>(a.size());
}

}  // namespace gse::audio
