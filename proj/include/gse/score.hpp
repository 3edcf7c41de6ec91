#pragma once

#include <span>
#include <string>
#include <vector>

#include "gse/error.hpp"
#include "gse/ledger.hpp"
#include "gse/sde.hpp"

namespace gse {

/// Recurrent state carried between chunks for one network at one reverse step.
using HistoryState = std::vector<double>;

enum class ScoreKind { Learned, Discriminative, Hybrid, AnalyticGaussian };

inline constexpr const char* to_string(ScoreKind k) noexcept {
    switch (k) {
        case ScoreKind::Learned: return "learned";
        case ScoreKind::Discriminative: return "discriminative";
        case ScoreKind::Hybrid: return "hybrid";
        case ScoreKind::AnalyticGaussian: return "analytic-gaussian";
    }
    return "?";
}

/// One score evaluation request.
struct ScoreQuery {
    std::span<const double> x;    ///< current iterate x_t
    std::span<const double> y;    ///< noisy conditioning signal
    double t = 0.0;               ///< evaluation time
    int step = 0;                 ///< reverse step index n in 1..N, 0 when not inside a reverse loop
    bool predictor = true;        ///< false for corrector sub-steps
    std::span<const double> x_d;  ///< cached denoiser estimate, empty when unavailable
};

/// Pluggable estimate of grad_x log p_t(x | y).
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;

    [[nodiscard]] virtual ScoreKind kind() const noexcept = 0;

    /// True when the provider consumes a denoiser estimate (ScoreQuery::x_d).
    [[nodiscard]] virtual bool needs_guidance() const noexcept { return false; }

    /// Length of the history state consumed per evaluation (0 for stateless providers).
    [[nodiscard]] virtual std::size_t state_size() const noexcept { return 0; }

    /// Writes the score into `out`. `state` may be null (treated as a fresh zero state);
    /// when `next_state` is non-null it receives the advanced history.
    virtual void evaluate(const ScoreQuery& q, const HistoryState* state, HistoryState* next_state,
                          std::span<double> out, CostLedger& ledger) const = 0;

    [[nodiscard]] std::vector<double> operator()(const ScoreQuery& q, CostLedger& ledger) const {
        std::vector<double> out(q.x.size());
        evaluate(q, nullptr, nullptr, out, ledger);
        return out;
    }
};

/// One-shot discriminative enhancement model producing the guidance estimate x_D.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    [[nodiscard]] virtual std::size_t state_size() const noexcept { return 0; }
    /// `state` may be null (fresh); otherwise it is read and advanced in place.
    [[nodiscard]] virtual std::vector<double> denoise(std::span<const double> y, HistoryState* state,
                                                      CostLedger& ledger) const = 0;
};

// ---------------------------------------------------------------------------
// Guidance schedule

/// Switch time t_phi and the number n_phi of reverse steps whose grid time
/// exceeds it. The boundary t == t_phi belongs to the learned branch.
struct GuidanceSchedule {
    double t_phi = 1.0;
    int n_phi = 0;

    /// True when reverse step n (grid time n T / N) uses the discriminative score.
    [[nodiscard]] bool discriminative_at(int step, const SdeParams& p) const noexcept {
        return p.grid_time(step) > t_phi;
    }
    [[nodiscard]] bool discriminative_at_time(double t) const noexcept { return t > t_phi; }
};

/// |{ n T/N : n T/N > t_phi, n = 1..N }|.
[[nodiscard]] inline int n_phi_from_t_phi(double t_phi, const SdeParams& p) {
    int count = 0;
    for (int n = 1; n <= p.N; ++n) {
        if (p.grid_time(n) > t_phi) ++count;
    }
    return count;
}

/// Switch time giving exactly `n_phi` discriminative steps: the grid time (N - n_phi) T / N.
[[nodiscard]] inline double t_phi_from_n_phi(int n_phi, const SdeParams& p) {
    if (n_phi < 0 || n_phi > p.N) {
        throw DomainError("t_phi_from_n_phi: n_phi=" + std::to_string(n_phi) + " outside [0, N]");
    }
    return p.grid_time(p.N - n_phi);
}

[[nodiscard]] inline GuidanceSchedule schedule_from_t_phi(double t_phi, const SdeParams& p) {
    if (!(t_phi >= 0.0 && t_phi <= p.T)) throw DomainError("t_phi outside [0, T]");
    return {t_phi, n_phi_from_t_phi(t_phi, p)};
}

[[nodiscard]] inline GuidanceSchedule schedule_from_n_phi(int n_phi, const SdeParams& p) {
    return {t_phi_from_n_phi(n_phi, p), n_phi};
}

// ---------------------------------------------------------------------------
// Closed-form scores

inline void discriminative_score_into(std::span<const double> x_t, std::span<const double> y, double t,
                                      std::span<const double> x_d, const SdeParams& p, std::span<double> out) {
    detail::require_same_length(x_t.size(), y.size(), "discriminative_score");
    detail::require_same_length(x_t.size(), x_d.size(), "discriminative_score");
    detail::require_same_length(x_t.size(), out.size(), "discriminative_score");
    const double s = sigma(t, p);
    if (!(s > 0.0)) throw DomainError("discriminative_score: zero variance at t=" + std::to_string(t));
    mean_into(x_d, y, t, p, out);
    // Divide by sigma twice rather than by sigma^2: this matches the noise
    // recovered by sample_perturbed bit for bit.
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ((out[i] - x_t[i]) / s) / s;
}

/// (mean(x_D, y, t) - x_t) / sigma(t)^2.
[[nodiscard]] inline std::vector<double> discriminative_score(std::span<const double> x_t, std::span<const double> y,
                                                              double t, std::span<const double> x_d,
                                                              const SdeParams& p) {
    detail::require_time(t, p, "discriminative_score");
    std::vector<double> out(x_t.size());
    discriminative_score_into(x_t, y, t, x_d, p, out);
    return out;
}

/// Isotropic Gaussian clean-signal distribution N(m0, var0 I).
struct GaussianPrior0 {
    std::vector<double> m0;
    double var0 = 1.0;
};

/// Marginal variance of x_t when x_0 ~ N(m0, var0 I): e^{-2 gamma t} var0 + sigma(t)^2.
[[nodiscard]] inline double gaussian_marginal_variance(double t, double var0, const SdeParams& p) {
    const double a = clean_weight(t, p);
    return a * a * var0 + variance(t, p);
}

inline void analytic_gaussian_score_into(std::span<const double> x_t, std::span<const double> y, double t,
                                         const GaussianPrior0& prior, const SdeParams& p, std::span<double> out) {
    detail::require_same_length(x_t.size(), prior.m0.size(), "analytic_gaussian_score");
    detail::require_same_length(x_t.size(), out.size(), "analytic_gaussian_score");
    if (!(prior.var0 > 0.0)) throw DomainError("analytic_gaussian_score: var0 must be positive");
    const double v = gaussian_marginal_variance(t, prior.var0, p);
    mean_into(prior.m0, y, t, p, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(x_t[i] - out[i]) / v;
}

[[nodiscard]] inline std::vector<double> analytic_gaussian_score(std::span<const double> x_t,
                                                                 std::span<const double> y, double t,
                                                                 const GaussianPrior0& prior, const SdeParams& p) {
    detail::require_time(t, p, "analytic_gaussian_score");
    std::vector<double> out(x_t.size());
    analytic_gaussian_score_into(x_t, y, t, prior, p, out);
    return out;
}

// ---------------------------------------------------------------------------
// Providers

class DiscriminativeScore final : public ScoreProvider {
public:
    explicit DiscriminativeScore(SdeParams p) : params_(p) {}

    [[nodiscard]] ScoreKind kind() const noexcept override { return ScoreKind::Discriminative; }
    [[nodiscard]] bool needs_guidance() const noexcept override { return true; }

    void evaluate(const ScoreQuery& q, const HistoryState*, HistoryState*, std::span<double> out,
                  CostLedger& ledger) const override {
        if (q.x_d.empty()) throw ConfigError("discriminative score requires a denoiser estimate");
        discriminative_score_into(q.x, q.y, q.t, q.x_d, params_, out);
        ledger.record_evaluation(ScoreBranch::Discriminative, q.predictor);
    }

private:
    SdeParams params_;
};

class AnalyticGaussianScore final : public ScoreProvider {
public:
    AnalyticGaussianScore(GaussianPrior0 prior, SdeParams p) : prior_(std::move(prior)), params_(p) {}

    [[nodiscard]] ScoreKind kind() const noexcept override { return ScoreKind::AnalyticGaussian; }

    void evaluate(const ScoreQuery& q, const HistoryState*, HistoryState*, std::span<double> out,
                  CostLedger& ledger) const override {
        analytic_gaussian_score_into(q.x, q.y, q.t, prior_, params_, out);
        ledger.record_evaluation(ScoreBranch::Analytic, q.predictor);
    }

    [[nodiscard]] const GaussianPrior0& prior() const noexcept { return prior_; }

private:
    GaussianPrior0 prior_;
    SdeParams params_;
};

/// Discriminative score while t > t_phi, the wrapped learned score otherwise.
/// Inside a reverse loop the switch is decided on the step's grid time, so
/// corrector sub-steps follow their predictor's branch.
class HybridScore final : public ScoreProvider {
public:
    HybridScore(const ScoreProvider& learned, GuidanceSchedule schedule, SdeParams p)
        : learned_(learned), schedule_(schedule), discriminative_(p), params_(p) {}

    [[nodiscard]] ScoreKind kind() const noexcept override { return ScoreKind::Hybrid; }
    [[nodiscard]] bool needs_guidance() const noexcept override { return true; }
    [[nodiscard]] std::size_t state_size() const noexcept override { return learned_.state_size(); }
    [[nodiscard]] const GuidanceSchedule& schedule() const noexcept { return schedule_; }

    [[nodiscard]] bool uses_discriminative(const ScoreQuery& q) const noexcept {
        return q.step > 0 ? schedule_.discriminative_at(q.step, params_) : schedule_.discriminative_at_time(q.t);
    }

    void evaluate(const ScoreQuery& q, const HistoryState* state, HistoryState* next_state, std::span<double> out,
                  CostLedger& ledger) const override {
        if (uses_discriminative(q)) {
            discriminative_.evaluate(q, nullptr, nullptr, out, ledger);
            // The learned network is not run on this step, so its history is carried over unchanged.
            if (next_state != nullptr) {
                if (state != nullptr) {
                    *next_state = *state;
                } else {
                    next_state->assign(learned_.state_size(), 0.0);
                }
            }
        } else {
            learned_.evaluate(q, state, next_state, out, ledger);
        }
    }

private:
    const ScoreProvider& learned_;
    GuidanceSchedule schedule_;
    DiscriminativeScore discriminative_;
    SdeParams params_;
};

/// Free-function form of the switched score.
[[nodiscard]] inline std::vector<double> hybrid_score(std::span<const double> x_t, std::span<const double> y,
                                                      double t, const GuidanceSchedule& schedule,
                                                      const ScoreProvider& learned, std::span<const double> x_d,
                                                      const SdeParams& p, CostLedger& ledger) {
    HybridScore hybrid(learned, schedule, p);
    ScoreQuery q{x_t, y, t, 0, true, x_d};
    return hybrid(q, ledger);
}

}  // namespace gse
