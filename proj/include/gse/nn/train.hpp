#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "gse/error.hpp"
#include "gse/nn/loss.hpp"
#include "gse/nn/network.hpp"
#include "gse/nn/optim.hpp"
#include "gse/random.hpp"

namespace gse::nn {

struct TrainConfig {
    int batch_size = 16;
    int steps = 1000;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    /// Cosine decay of the learning rate down to 10% over the run.
    bool cosine_decay = true;
    /// Global gradient-norm clip; 0 disables.
    double grad_clip = 0.0;
    ScoreWeighting weighting = ScoreWeighting::SigmaSquared;

    void validate() const {
        if (batch_size < 1 || steps < 0) throw ConfigError("TrainConfig: batch_size >= 1 and steps >= 0 required");
        if (!(learning_rate >= 0.0)) throw ConfigError("TrainConfig: learning_rate must be nonnegative");
    }
};

struct TrainResult {
    std::vector<double> loss_curve;
};

/// Source of training batches.
class Dataset {
public:
    virtual ~Dataset() = default;
    [[nodiscard]] virtual std::vector<TrainingPair> sample_batch(RandomSource& rng, std::size_t n) const = 0;
};

/// Random fixed-length crops from a pool of utterances.
class SegmentDataset final : public Dataset {
public:
    SegmentDataset(std::vector<TrainingPair> utterances, std::size_t segment)
        : utterances_(std::move(utterances)), segment_(segment) {
        if (utterances_.empty()) throw ConfigError("SegmentDataset: empty dataset");
        for (const auto& u : utterances_) {
            gse::detail::require_same_length(u.x0.size(), u.y.size(), "SegmentDataset");
            if (u.x0.size() < segment_) throw ConfigError("SegmentDataset: utterance shorter than segment");
        }
    }

    [[nodiscard]] std::vector<TrainingPair> sample_batch(RandomSource& rng, std::size_t n) const override {
        std::vector<TrainingPair> batch;
        batch.reserve(n);
        for (std::size_t b = 0; b < n; ++b) {
            const auto& u = utterances_[rng.next_u64() % utterances_.size()];
            const std::size_t span = u.x0.size() - segment_ + 1;
            const std::size_t start = rng.next_u64() % span;
            const auto first = static_cast<std::ptrdiff_t>(start);
            const auto last = static_cast<std::ptrdiff_t>(start + segment_);
            batch.push_back({std::vector<double>(u.x0.begin() + first, u.x0.begin() + last),
                             std::vector<double>(u.y.begin() + first, u.y.begin() + last)});
        }
        return batch;
    }

    [[nodiscard]] std::size_t size() const noexcept { return utterances_.size(); }

private:
    std::vector<TrainingPair> utterances_;
    std::size_t segment_;
};

/// Fresh pairs drawn from a generator on every batch.
class GeneratedDataset final : public Dataset {
public:
    explicit GeneratedDataset(std::function<TrainingPair(RandomSource&)> gen) : gen_(std::move(gen)) {}

    [[nodiscard]] std::vector<TrainingPair> sample_batch(RandomSource& rng, std::size_t n) const override {
        std::vector<TrainingPair> batch;
        batch.reserve(n);
        for (std::size_t b = 0; b < n; ++b) batch.push_back(gen_(rng));
        return batch;
    }

private:
    std::function<TrainingPair(RandomSource&)> gen_;
};

/// Generic first-order loop. `batch_loss(rng)` returns loss and gradient of one batch.
template <class BatchLoss>
TrainResult optimize(std::vector<double>& params, BatchLoss&& batch_loss, const TrainConfig& cfg) {
    cfg.validate();
    Optimizer opt(cfg.optimizer, params.size(), cfg.learning_rate);
    RandomSource rng(cfg.seed, 0x7a11);
    TrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        if (cfg.cosine_decay && cfg.steps > 1) {
            const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
            opt.set_learning_rate(cfg.learning_rate * (0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * frac))));
        }
        LossResult lr = batch_loss(rng);
        if (!std::isfinite(lr.loss)) {
            throw NumericalError("training diverged at step " + std::to_string(step) + " (loss is not finite)");
        }
        if (cfg.grad_clip > 0.0) {
            const double gn = norm2(lr.gradient);
            if (gn > cfg.grad_clip) {
                for (auto& g : lr.gradient) g *= cfg.grad_clip / gn;
            }
        }
        opt.step(params, lr.gradient);
        if (!all_finite(params)) {
            throw NumericalError("training diverged at step " + std::to_string(step) + " (non-finite parameters)");
        }
        result.loss_curve.push_back(lr.loss);
    }
    return result;
}

/// Score matching on batches from `data`.
inline TrainResult train(ScoreNet& net, const Dataset& data, const TrainConfig& cfg) {
    return optimize(
        net.params(),
        [&](RandomSource& rng) {
            const auto batch = data.sample_batch(rng, static_cast<std::size_t>(cfg.batch_size));
            return score_matching_loss(net, batch, net.sde(), rng, cfg.weighting);
        },
        cfg);
}

/// SNR-loss training of the discriminative model.
inline TrainResult train(DenoiserNet& net, const Dataset& data, const TrainConfig& cfg) {
    return optimize(
        net.params(),
        [&](RandomSource& rng) {
            const auto batch = data.sample_batch(rng, static_cast<std::size_t>(cfg.batch_size));
            return denoiser_loss(net, batch);
        },
        cfg);
}

}  // namespace gse::nn
