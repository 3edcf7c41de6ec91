#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "gse/error.hpp"
#include "gse/nn/loss.hpp"
#include "gse/nn/network.hpp"
#include "gse/nn/providers.hpp"
#include "gse/sampler.hpp"
#include "gse/score.hpp"
#include "gse/sde.hpp"
#include "gse/signal.hpp"
#include "gse/streaming.hpp"

namespace gse {

inline constexpr double kInputPeak = 0.9;

/// Gain that maps max|y| to `peak` (1 for a silent input).
[[nodiscard]] inline double peak_gain(std::span<const double> y, double peak = kInputPeak) {
    const double m = max_abs(y);
    return m > 0.0 ? peak / m : 1.0;
}

/// Scales a training pair by the gain of its noisy part.
[[nodiscard]] inline nn::TrainingPair normalized_pair(std::span<const double> x0, std::span<const double> y) {
    const double g = peak_gain(y);
    nn::TrainingPair p{std::vector<double>(x0.begin(), x0.end()), std::vector<double>(y.begin(), y.end())};
    for (auto& v : p.x0) v *= g;
    for (auto& v : p.y) v *= g;
    return p;
}

enum class EnhanceMode {
    /// Learned score only when n_phi = 0, guided otherwise.
    Auto,
    /// Always guided, also at n_phi = 0 (keeps one denoiser pass per run).
    Hybrid,
    /// Denoiser output without diffusion.
    DenoiserOnly,
};

struct EnhanceOptions {
    SdeParams sde{};
    SamplerConfig sampler{};
    int n_phi = 0;
    EnhanceMode mode = EnhanceMode::Auto;
    bool streaming = false;
    StreamConfig stream{};
    bool normalize = true;
    std::uint64_t seed = 0;
};

struct EnhanceResult {
    Signal x;
    CostLedger ledger;
    GuidanceSchedule schedule;
    double gain = 1.0;
    double wall_ms = 0.0;
    /// Processing time over audio duration.
    double rtf = 0.0;
    /// Chunk length in samples, 0 offline.
    std::size_t chunk_size = 0;
    std::optional<LatencyReport> latency;
};

namespace detail {

inline std::vector<double> pad_to_multiple(std::span<const double> y, std::size_t m) {
    const std::size_t L = (y.size() + m - 1) / m * m;
    std::vector<double> out(L, 0.0);
    std::copy(y.begin(), y.end(), out.begin());
    return out;
}

}  // namespace detail

/// Normalizes, enhances offline or chunk by chunk, and restores the input scale.
/// The gain is taken over the whole input, which a live stream would replace by
/// a fixed calibration gain.
[[nodiscard]] inline EnhanceResult enhance(const Signal& y, const nn::ScoreNet* score_net,
                                           const nn::DenoiserNet* denoiser_net, const EnhanceOptions& opt) {
    validate_signal(y.samples, "enhance");
    opt.sde.validate();
    if (opt.sampler.N != opt.sde.N) throw ConfigError("sampler N differs from SDE N");
    const bool guided = opt.mode == EnhanceMode::DenoiserOnly || opt.mode == EnhanceMode::Hybrid || opt.n_phi > 0;
    if (guided && denoiser_net == nullptr) throw ConfigError("enhance: a denoiser checkpoint is required");
    if (opt.mode != EnhanceMode::DenoiserOnly && score_net == nullptr) {
        throw ConfigError("enhance: a score network checkpoint is required");
    }

    EnhanceResult result;
    result.schedule = schedule_from_n_phi(opt.n_phi, opt.sde);
    result.gain = opt.normalize ? peak_gain(y.samples) : 1.0;
    std::vector<double> yn(y.samples);
    for (auto& v : yn) v *= result.gain;

    std::size_t frame = 1;
    if (score_net != nullptr) frame = std::lcm(frame, score_net->frame_size());
    if (denoiser_net != nullptr) frame = std::lcm(frame, denoiser_net->frame_size());

    std::optional<nn::LearnedScore> learned;
    if (score_net != nullptr) learned.emplace(*score_net);
    std::optional<nn::NetDenoiser> denoiser;
    if (denoiser_net != nullptr) denoiser.emplace(*denoiser_net);
    std::optional<HybridScore> hybrid;
    if (opt.mode != EnhanceMode::DenoiserOnly && guided) hybrid.emplace(*learned, result.schedule, opt.sde);
    const Denoiser* den = guided ? &*denoiser : nullptr;

    const auto start = std::chrono::steady_clock::now();
    std::vector<double> x;
    if (opt.mode == EnhanceMode::DenoiserOnly) {
        if (opt.streaming) {
            const std::size_t K = opt.stream.chunk_size();
            if (K % frame != 0) throw ConfigError("chunk size is not a multiple of the network frame size");
            HistoryState state(den->state_size(), 0.0);
            LatencyReport lat{opt.stream.chunk_ms, opt.stream.chunk_ms, {}};
            std::vector<double> chunk(K);
            for (std::size_t s = 0; s < yn.size(); s += K) {
                const std::size_t n = std::min(K, yn.size() - s);
                std::fill(chunk.begin(), chunk.end(), 0.0);
                std::copy_n(yn.begin() + static_cast<std::ptrdiff_t>(s), n, chunk.begin());
                const auto t0 = std::chrono::steady_clock::now();
                auto out = den->denoise(chunk, &state, result.ledger);
                lat.chunk_wall_ms.push_back(
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
                x.insert(x.end(), out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n));
            }
            result.chunk_size = K;
            result.latency = std::move(lat);
        } else {
            auto padded = detail::pad_to_multiple(yn, frame);
            x = den->denoise(padded, nullptr, result.ledger);
            x.resize(yn.size());
        }
    } else {
        const ScoreProvider& provider = hybrid ? static_cast<const ScoreProvider&>(*hybrid) : *learned;
        if (opt.streaming) {
            const std::size_t K = opt.stream.chunk_size();
            if (K % frame != 0) throw ConfigError("chunk size is not a multiple of the network frame size");
            auto r = enhance_stream(yn, opt.stream, provider, den, opt.sampler, opt.sde, opt.seed);
            x = std::move(r.x);
            result.ledger = r.ledger;
            result.chunk_size = K;
            result.latency = std::move(r.latency);
        } else {
            auto padded = detail::pad_to_multiple(yn, frame);
            auto r = enhance_offline(padded, provider, den, opt.sampler, opt.sde, opt.seed);
            x = std::move(r.x);
            x.resize(yn.size());
            result.ledger = r.ledger;
        }
    }
    result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.rtf = result.latency ? realtime_factor(*result.latency) : result.wall_ms / (1000.0 * y.duration_s());

    for (auto& v : x) v /= result.gain;
    result.x = Signal(std::move(x), y.sample_rate);
    return result;
}

}  // namespace gse
