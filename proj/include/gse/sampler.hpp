#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gse/error.hpp"
#include "gse/ledger.hpp"
#include "gse/random.hpp"
#include "gse/score.hpp"
#include "gse/sde.hpp"

namespace gse {

/// Step-size rule of the Langevin corrector.
enum class CorrectorRule {
    /// eps = 2 (r sigma(t))^2, the annealed form tied to the kernel spread.
    Annealed,
    /// eps = 2 (r ||z|| / ||s||)^2, adapted to the current score norm.
    SnrAdaptive,
};

struct SamplerConfig {
    int N = 30;
    int corrector_steps = 1;
    double corrector_snr = 0.5;
    CorrectorRule corrector_rule = CorrectorRule::Annealed;
    std::uint64_t seed = 0;
    /// Drop the noise term of the last predictor step (ablation switch).
    bool final_mean_projection = false;

    void validate() const {
        if (N < 1) throw ConfigError("SamplerConfig: N must be >= 1");
        if (corrector_steps < 0) throw ConfigError("SamplerConfig: corrector_steps must be >= 0");
        if (!(corrector_snr > 0.0)) throw ConfigError("SamplerConfig: corrector_snr must be positive");
    }
};

/// Reverse-diffusion predictor with an explicit noise vector:
/// x <- x + [-f(x, y) + g(t)^2 s] dt + g(t) sqrt(dt) z, t <- t - dt.
inline void predictor_update(DiffusionState& state, std::span<const double> y, std::span<const double> score,
                             const SdeParams& p, double dt, std::span<const double> z) {
    detail::require_same_length(state.x.size(), y.size(), "predictor_step");
    detail::require_same_length(state.x.size(), score.size(), "predictor_step");
    if (state.t - dt < -1e-12) throw DomainError("predictor_step: step would cross t = 0");
    const double g = diffusion_coeff(state.t, p);
    const double g2dt = g * g * dt;
    const double noise = g * std::sqrt(dt);
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        const double f = p.gamma * (y[i] - state.x[i]);
        state.x[i] += -f * dt + g2dt * score[i] + (z.empty() ? 0.0 : noise * z[i]);
    }
    state.t = std::max(state.t - dt, 0.0);
}

/// Predictor step drawing its own noise.
inline DiffusionState predictor_step(DiffusionState state, std::span<const double> y, std::span<const double> score,
                                     const SdeParams& p, double dt, RandomSource& rng) {
    std::vector<double> z(state.x.size());
    rng.fill_normal(z);
    predictor_update(state, y, score, p, dt, z);
    return state;
}

/// Langevin step size; 0 when the rule is undefined (zero score norm).
[[nodiscard]] inline double langevin_step_size(CorrectorRule rule, double r, double sigma_t,
                                               std::span<const double> z, std::span<const double> score) {
    if (rule == CorrectorRule::Annealed) return 2.0 * (r * sigma_t) * (r * sigma_t);
    const double sn = norm2(score);
    if (!(sn > 0.0)) return 0.0;
    const double ratio = r * norm2(z) / sn;
    return 2.0 * ratio * ratio;
}

/// x <- x + eps s + sqrt(2 eps) z.
inline void langevin_update(std::span<double> x, std::span<const double> score, std::span<const double> z,
                            double eps) {
    const double k = std::sqrt(2.0 * eps);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += eps * score[i] + k * z[i];
}

/// One corrector sub-step at fixed time; the score is recomputed at the current x.
/// Corrector evaluations read `history` but never advance it.
inline void corrector_step(DiffusionState& state, std::span<const double> y, const ScoreProvider& provider,
                           const ScoreQuery& base, const HistoryState* history, const SamplerConfig& cfg,
                           const SdeParams& p, RandomSource& rng, CostLedger& ledger) {
    std::vector<double> s(state.x.size()), z(state.x.size());
    ScoreQuery q = base;
    q.x = state.x;
    q.y = y;
    q.predictor = false;
    provider.evaluate(q, history, nullptr, s, ledger);
    rng.fill_normal(z);
    const double eps = langevin_step_size(cfg.corrector_rule, cfg.corrector_snr, sigma(q.t, p), z, s);
    if (cfg.corrector_rule == CorrectorRule::SnrAdaptive && !(norm2(s) > 0.0)) {
        ++ledger.skipped_correctors;
        return;
    }
    langevin_update(state.x, s, z, eps);
}

/// Where the guidance estimate x_D comes from.
struct Guidance {
    const Denoiser* denoiser = nullptr;
    /// Used instead of `denoiser` when non-empty.
    std::span<const double> x_d{};
};

/// Per-step recurrent states shared with a streaming bank.
struct StepStates {
    std::vector<HistoryState>* score = nullptr;  ///< N entries, index n - 1
    HistoryState* denoiser = nullptr;
};

struct ReverseResult {
    std::vector<double> x;
    std::vector<double> x_d;  ///< empty unless guidance was used
    CostLedger ledger;
};

/// Predictor-corrector integration of the reverse SDE from x_T ~ N(y, sigma(T)^2 I).
/// Step n (n = N..1) evaluates the score at grid time n T / N (floored at t_eps),
/// moves to (n - 1) T / N, then runs the configured corrector sub-steps there
/// with the same branch and history as the predictor.
inline ReverseResult reverse_process(std::span<const double> y, const ScoreProvider& provider,
                                     const Guidance& guidance, const SamplerConfig& cfg, const SdeParams& p,
                                     RandomSource& rng, StepStates states = {}) {
    cfg.validate();
    p.validate();
    if (cfg.N != p.N) throw ConfigError("SamplerConfig.N does not match SdeParams.N");
    validate_signal(y, "reverse_process");
    if (states.score != nullptr && states.score->size() != static_cast<std::size_t>(p.N)) {
        throw ConfigError("reverse_process: history bank does not hold N states");
    }

    ReverseResult result;
    CostLedger& ledger = result.ledger;
    if (provider.needs_guidance()) {
        if (!guidance.x_d.empty()) {
            detail::require_same_length(guidance.x_d.size(), y.size(), "reverse_process guidance");
            result.x_d.assign(guidance.x_d.begin(), guidance.x_d.end());
        } else if (guidance.denoiser != nullptr) {
            result.x_d = guidance.denoiser->denoise(y, states.denoiser, ledger);
        } else {
            throw ConfigError("reverse_process: provider needs a denoiser estimate");
        }
    }

    const double dt = p.dt();
    const double sigma_T = sigma(p.T, p);
    DiffusionState state{std::vector<double>(y.size()), p.T};
    for (std::size_t i = 0; i < y.size(); ++i) state.x[i] = y[i] + sigma_T * rng.normal();

    std::vector<double> s(y.size()), z(y.size());
    const HistoryState fresh(provider.state_size(), 0.0);
    HistoryState next;
    for (int n = p.N; n >= 1; --n) {
        const double t = p.grid_time(n);
        const HistoryState* history = states.score != nullptr ? &(*states.score)[n - 1] : &fresh;
        ScoreQuery q{state.x, y, std::max(t, p.t_eps), n, true, result.x_d};
        next = *history;
        provider.evaluate(q, history, &next, s, ledger);
        state.t = t;
        rng.fill_normal(z);
        const bool last = n == 1;
        predictor_update(state, y, s, p, dt, (last && cfg.final_mean_projection) ? std::span<const double>{} : z);
        if (!all_finite(state.x)) {
            throw NumericalError("reverse_process: non-finite state after predictor step " + std::to_string(n));
        }
        ScoreQuery cq = q;
        cq.t = std::max(p.grid_time(n - 1), p.t_eps);
        for (int c = 0; c < cfg.corrector_steps; ++c) {
            corrector_step(state, y, provider, cq, history, cfg, p, rng, ledger);
            if (!all_finite(state.x)) {
                throw NumericalError("reverse_process: non-finite state after corrector at step " +
                                     std::to_string(n));
            }
        }
        if (states.score != nullptr) (*states.score)[n - 1] = std::move(next);
    }
    result.x = std::move(state.x);
    return result;
}

}  // namespace gse
