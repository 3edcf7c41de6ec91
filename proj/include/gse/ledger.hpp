#pragma once

#include <array>
#include <cstdint>

namespace gse {

/// Which score source served an evaluation.
enum class ScoreBranch : int { Learned = 0, Discriminative = 1, Analytic = 2 };

inline constexpr const char* to_string(ScoreBranch b) noexcept {
    switch (b) {
        case ScoreBranch::Learned: return "learned";
        case ScoreBranch::Discriminative: return "discriminative";
        case ScoreBranch::Analytic: return "analytic";
    }
    return "?";
}

/// Forward-pass and multiply-accumulate counts of one run. Counters only grow.
struct CostLedger {
    std::int64_t score_net_forwards = 0;
    std::int64_t denoiser_forwards = 0;
    std::int64_t mac_total = 0;
    /// Predictor steps served by each branch.
    std::array<std::int64_t, 3> predictor_steps{};
    /// All score evaluations (predictor and corrector) per branch.
    std::array<std::int64_t, 3> evaluations{};
    std::int64_t skipped_correctors = 0;

    void record_evaluation(ScoreBranch b, bool predictor) noexcept {
        ++evaluations[static_cast<int>(b)];
        if (predictor) ++predictor_steps[static_cast<int>(b)];
    }

    [[nodiscard]] std::int64_t steps(ScoreBranch b) const noexcept { return predictor_steps[static_cast<int>(b)]; }

    CostLedger& operator+=(const CostLedger& o) noexcept {
        score_net_forwards += o.score_net_forwards;
        denoiser_forwards += o.denoiser_forwards;
        mac_total += o.mac_total;
        for (int i = 0; i < 3; ++i) {
            predictor_steps[i] += o.predictor_steps[i];
            evaluations[i] += o.evaluations[i];
        }
        skipped_correctors += o.skipped_correctors;
        return *this;
    }

    friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

}  // namespace gse
