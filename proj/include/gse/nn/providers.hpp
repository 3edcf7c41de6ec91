#pragma once

#include "gse/nn/network.hpp"
#include "gse/score.hpp"

namespace gse::nn {

/// ScoreProvider backed by a ScoreNet; counts one network forward per evaluation.
class LearnedScore final : public ScoreProvider {
public:
    explicit LearnedScore(const ScoreNet& net) : net_(net) {}

    [[nodiscard]] ScoreKind kind() const noexcept override { return ScoreKind::Learned; }
    [[nodiscard]] std::size_t state_size() const noexcept override { return net_.state_size(); }
    [[nodiscard]] const ScoreNet& net() const noexcept { return net_; }

    void evaluate(const ScoreQuery& q, const HistoryState* state, HistoryState* next_state, std::span<double> out,
                  CostLedger& ledger) const override {
        HistoryState work = state != nullptr ? *state : HistoryState(net_.state_size(), 0.0);
        net_.forward(q.x, q.y, q.t, work, out);
        ledger.score_net_forwards += 1;
        ledger.mac_total += net_.macs(q.x.size());
        ledger.record_evaluation(ScoreBranch::Learned, q.predictor);
        if (next_state != nullptr) *next_state = std::move(work);
    }

private:
    const ScoreNet& net_;
};

/// Denoiser backed by a DenoiserNet.
class NetDenoiser final : public Denoiser {
public:
    explicit NetDenoiser(const DenoiserNet& net) : net_(net) {}

    [[nodiscard]] std::size_t state_size() const noexcept override { return net_.state_size(); }
    [[nodiscard]] const DenoiserNet& net() const noexcept { return net_; }

    [[nodiscard]] std::vector<double> denoise(std::span<const double> y, HistoryState* state,
                                              CostLedger& ledger) const override {
        HistoryState fresh;
        HistoryState& work = state != nullptr ? *state : fresh;
        if (work.empty()) work.assign(net_.state_size(), 0.0);
        std::vector<double> out(y.size());
        net_.forward(y, work, out);
        ledger.denoiser_forwards += 1;
        ledger.mac_total += net_.macs(y.size());
        return out;
    }

private:
    const DenoiserNet& net_;
};

}  // namespace gse::nn
