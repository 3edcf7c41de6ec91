#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "gse/error.hpp"
#include "gse/nn/network.hpp"
#include "gse/random.hpp"
#include "gse/sde.hpp"

namespace gse::nn {

/// Clean/noisy training pair.
struct TrainingPair {
    std::vector<double> x0;
    std::vector<double> y;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Per-sample weight of the score-matching residual.
enum class ScoreWeighting {
    /// ||s + z / sigma||^2 exactly as written.
    Unweighted,
    /// sigma(t)^2 ||s + z / sigma||^2 = ||eps_hat - z||^2; same minimizer, bounded targets.
    SigmaSquared,
};

/// Batch mean over items of ||s(x_t, y, t) + z / sigma(t)||^2 (optionally weighted),
/// with t ~ U[t_eps, T] and (x_t, z) drawn from the perturbation kernel. Every
/// item starts from a fresh network state.
[[nodiscard]] inline LossResult score_matching_loss(const ScoreNet& net, std::span<const TrainingPair> batch,
                                                    const SdeParams& p, RandomSource& rng,
                                                    ScoreWeighting weighting = ScoreWeighting::Unweighted) {
    if (batch.empty()) throw DimensionError("score_matching_loss: empty batch");
    LossResult result{0.0, std::vector<double>(net.params().size(), 0.0)};
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& item : batch) {
        const double t = rng.uniform(p.t_eps, p.T);
        const auto [x_t, z] = sample_perturbed(item.x0, item.y, t, p, rng);
        std::vector<double> state(net.state_size(), 0.0);
        std::vector<double> score(x_t.size());
        ScoreTape tape;
        net.forward(x_t, item.y, t, state, score, &tape);
        const double s = tape.sigma;
        const double w = weighting == ScoreWeighting::SigmaSquared ? s * s : 1.0;
        std::vector<double> dscore(score.size());
        double sq = 0.0;
        for (std::size_t i = 0; i < score.size(); ++i) {
            const double r = score[i] + z[i] / s;
            sq += r * r;
            dscore[i] = 2.0 * w * r * inv_batch;
        }
        result.loss += w * sq * inv_batch;
        net.backward(tape, dscore, result.gradient);
    }
    return result;
}

inline constexpr double kSnrEpsilon = 1e-12;
inline constexpr double kDbCap = 120.0;

/// Negative SNR in dB, -10 log10(||x0||^2 / (||x0 - x_hat||^2 + eps)), floored at -120 dB.
[[nodiscard]] inline double snr_loss(std::span<const double> x_hat, std::span<const double> x0) {
    gse::detail::require_same_length(x_hat.size(), x0.size(), "snr_loss");
    const double target = energy(x0);
    if (!(target > 0.0)) throw DomainError("snr_loss: silent target");
    double residual = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) residual += (x0[i] - x_hat[i]) * (x0[i] - x_hat[i]);
    return std::max(-10.0 * std::log10(target / (residual + kSnrEpsilon)), -kDbCap);
}

/// d snr_loss / d x_hat (zero once the floor is active).
[[nodiscard]] inline std::vector<double> snr_loss_gradient(std::span<const double> x_hat,
                                                           std::span<const double> x0) {
    std::vector<double> g(x_hat.size(), 0.0);
    if (snr_loss(x_hat, x0) <= -kDbCap) return g;
    double residual = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) residual += (x0[i] - x_hat[i]) * (x0[i] - x_hat[i]);
    const double k = 10.0 / std::numbers::ln10 / (residual + kSnrEpsilon);
    for (std::size_t i = 0; i < x0.size(); ++i) g[i] = -2.0 * k * (x0[i] - x_hat[i]);
    return g;
}

/// Batch mean SNR loss of the denoiser, each item from a fresh state.
[[nodiscard]] inline LossResult denoiser_loss(const DenoiserNet& net, std::span<const TrainingPair> batch) {
    if (batch.empty()) throw DimensionError("denoiser_loss: empty batch");
    LossResult result{0.0, std::vector<double>(net.params().size(), 0.0)};
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& item : batch) {
        std::vector<double> state(net.state_size(), 0.0);
        std::vector<double> x_hat(item.y.size());
        FrameTape tape;
        net.forward(item.y, state, x_hat, &tape);
        result.loss += snr_loss(x_hat, item.x0) * inv_batch;
        auto g = snr_loss_gradient(x_hat, item.x0);
        for (auto& v : g) v *= inv_batch;
        net.backward(tape, g, result.gradient);
    }
    return result;
}

}  // namespace gse::nn
