#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gse/error.hpp"
#include "gse/ledger.hpp"
#include "gse/random.hpp"
#include "gse/sampler.hpp"
#include "gse/score.hpp"
#include "gse/sde.hpp"

namespace gse {

struct StreamConfig {
    double chunk_ms = 50.0;
    int sample_rate = 16000;

    [[nodiscard]] std::size_t chunk_size() const {
        const double k = chunk_ms * sample_rate / 1000.0;
        const auto rounded = static_cast<std::size_t>(std::llround(k));
        if (rounded < 1 || std::abs(k - static_cast<double>(rounded)) > 1e-9) {
            throw ConfigError("StreamConfig: chunk_ms * sample_rate / 1000 must be a positive integer");
        }
        return rounded;
    }

    void validate() const {
        if (!(chunk_ms > 0.0) || sample_rate <= 0) throw ConfigError("StreamConfig: invalid chunk or rate");
        (void)chunk_size();
    }
};

/// Recurrent states carried from chunk to chunk: one score-network state per
/// reverse step index n = 1..N, plus the guidance denoiser's state. A fresh
/// bank holds zero vectors.
class HistoryBank {
public:
    HistoryBank(int N, std::size_t chunk_size, std::size_t score_state_size, std::size_t denoiser_state_size)
        : N_(N),
          chunk_size_(chunk_size),
          score_states_(static_cast<std::size_t>(N), HistoryState(score_state_size, 0.0)),
          denoiser_state_(denoiser_state_size, 0.0) {
        if (N < 1 || chunk_size < 1) throw ConfigError("HistoryBank: N and chunk size must be positive");
    }

    [[nodiscard]] int N() const noexcept { return N_; }
    [[nodiscard]] std::size_t chunk_size() const noexcept { return chunk_size_; }
    [[nodiscard]] std::size_t chunks_processed() const noexcept { return chunks_; }
    [[nodiscard]] std::size_t size() const noexcept { return score_states_.size(); }
    [[nodiscard]] const std::vector<HistoryState>& score_states() const noexcept { return score_states_; }
    [[nodiscard]] const HistoryState& denoiser_state() const noexcept { return denoiser_state_; }

private:
    friend struct ChunkProcessor;

    int N_;
    std::size_t chunk_size_;
    std::vector<HistoryState> score_states_;
    HistoryState denoiser_state_;
    std::size_t chunks_ = 0;
};

struct ChunkResult {
    std::vector<double> x;
    CostLedger ledger;
};

/// Mutating access to the bank for the chunk processor only; chunks advance it in order.
struct ChunkProcessor {
    static ChunkResult run(std::span<const double> y_c, HistoryBank& bank, const ScoreProvider& provider,
                           const Denoiser* denoiser, const SamplerConfig& cfg, const SdeParams& p,
                           RandomSource& rng) {
        if (bank.N_ != p.N || bank.N_ != cfg.N) throw ConfigError("HistoryBank was built for a different N");
        if (y_c.size() != bank.chunk_size_) {
            throw ConfigError("process_chunk: chunk of " + std::to_string(y_c.size()) + " samples, bank expects " +
                              std::to_string(bank.chunk_size_));
        }
        for (const auto& s : bank.score_states_) {
            if (s.size() != provider.state_size()) throw ConfigError("HistoryBank state size does not match provider");
        }
        if (provider.needs_guidance()) {
            if (denoiser == nullptr) throw ConfigError("process_chunk: guided provider requires a streaming denoiser");
            if (bank.denoiser_state_.size() != denoiser->state_size()) {
                throw ConfigError("HistoryBank denoiser state does not match the denoiser");
            }
        }
        auto r = reverse_process(y_c, provider, Guidance{denoiser, {}}, cfg, p, rng,
                                 StepStates{&bank.score_states_, &bank.denoiser_state_});
        ++bank.chunks_;
        return {std::move(r.x), r.ledger};
    }
};

/// Runs the full reverse process on one chunk, conditioned on and advancing the bank.
inline ChunkResult process_chunk(std::span<const double> y_c, HistoryBank& bank, const ScoreProvider& provider,
                                 const Denoiser* denoiser, const SamplerConfig& cfg, const SdeParams& p,
                                 RandomSource& rng) {
    return ChunkProcessor::run(y_c, bank, provider, denoiser, cfg, p, rng);
}

struct LatencyReport {
    double algorithmic_latency_ms = 0.0;
    double chunk_ms = 0.0;
    std::vector<double> chunk_wall_ms;
};

/// Mean per-chunk wall time over the chunk duration.
[[nodiscard]] inline double realtime_factor(const LatencyReport& report) {
    if (report.chunk_wall_ms.empty()) throw DomainError("realtime_factor: report has no chunks");
    if (!(report.chunk_ms > 0.0)) throw DomainError("realtime_factor: chunk duration must be positive");
    double sum = 0.0;
    for (double w : report.chunk_wall_ms) sum += w;
    return sum / static_cast<double>(report.chunk_wall_ms.size()) / report.chunk_ms;
}

struct StreamResult {
    std::vector<double> x;
    CostLedger ledger;
    LatencyReport latency;
    std::size_t chunks = 0;
};

/// Chunk c draws its noise from RandomSource(seed).fork(c).
[[nodiscard]] inline RandomSource chunk_rng(std::uint64_t seed, std::size_t chunk) {
    return RandomSource(seed).fork(chunk);
}

/// Push/pull streaming front end with one chunk of algorithmic delay.
class StreamEnhancer {
public:
    StreamEnhancer(StreamConfig sc, const ScoreProvider& provider, const Denoiser* denoiser, SamplerConfig cfg,
                   SdeParams p, std::uint64_t seed)
        : sc_(sc),
          provider_(provider),
          denoiser_(denoiser),
          cfg_(cfg),
          params_(p),
          seed_(seed),
          bank_(p.N, sc.chunk_size(), provider.state_size(), denoiser != nullptr ? denoiser->state_size() : 0) {
        sc_.validate();
        latency_.algorithmic_latency_ms = sc_.chunk_ms;
        latency_.chunk_ms = sc_.chunk_ms;
    }

    [[nodiscard]] std::size_t chunk_size() const noexcept { return bank_.chunk_size(); }
    [[nodiscard]] const HistoryBank& bank() const noexcept { return bank_; }
    [[nodiscard]] const CostLedger& ledger() const noexcept { return ledger_; }
    [[nodiscard]] const LatencyReport& latency() const noexcept { return latency_; }

    /// Enhances one full chunk; the result becomes available through pull().
    void push(std::span<const double> chunk) {
        auto rng = chunk_rng(seed_, bank_.chunks_processed());
        const auto start = std::chrono::steady_clock::now();
        auto r = process_chunk(chunk, bank_, provider_, denoiser_, cfg_, params_, rng);
        const auto stop = std::chrono::steady_clock::now();
        latency_.chunk_wall_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        ledger_ += r.ledger;
        ready_.push_back(std::move(r.x));
    }

    [[nodiscard]] std::optional<std::vector<double>> pull() {
        if (ready_.empty()) return std::nullopt;
        auto out = std::move(ready_.front());
        ready_.pop_front();
        return out;
    }

private:
    StreamConfig sc_;
    const ScoreProvider& provider_;
    const Denoiser* denoiser_;
    SamplerConfig cfg_;
    SdeParams params_;
    std::uint64_t seed_;
    HistoryBank bank_;
    CostLedger ledger_;
    LatencyReport latency_;
    std::deque<std::vector<double>> ready_;
};

/// Splits y into ceil(L / K) chunks (the last zero-padded), enhances them in
/// order and returns the concatenation trimmed to L.
[[nodiscard]] inline StreamResult enhance_stream(std::span<const double> y, const StreamConfig& sc,
                                                 const ScoreProvider& provider, const Denoiser* denoiser,
                                                 const SamplerConfig& cfg, const SdeParams& p, std::uint64_t seed) {
    if (y.empty()) throw DimensionError("enhance_stream: empty input");
    StreamEnhancer stream(sc, provider, denoiser, cfg, p, seed);
    const std::size_t K = stream.chunk_size();
    StreamResult result;
    result.x.reserve(y.size());
    std::vector<double> chunk(K);
    for (std::size_t start = 0; start < y.size(); start += K) {
        const std::size_t n = std::min(K, y.size() - start);
        std::fill(chunk.begin(), chunk.end(), 0.0);
        std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(start), n, chunk.begin());
        stream.push(chunk);
        auto out = stream.pull();
        result.x.insert(result.x.end(), out->begin(), out->begin() + static_cast<std::ptrdiff_t>(n));
        ++result.chunks;
    }
    result.ledger = stream.ledger();
    result.latency = stream.latency();
    return result;
}

/// Whole-utterance enhancement with fresh states; equals the first chunk of a
/// stream with the same seed when the utterance is exactly one chunk long.
[[nodiscard]] inline ReverseResult enhance_offline(std::span<const double> y, const ScoreProvider& provider,
                                                   const Denoiser* denoiser, const SamplerConfig& cfg,
                                                   const SdeParams& p, std::uint64_t seed) {
    auto rng = chunk_rng(seed, 0);
    return reverse_process(y, provider, Guidance{denoiser, {}}, cfg, p, rng);
}

}  // namespace gse
