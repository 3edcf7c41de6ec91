#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gse/error.hpp"
#include "gse/nn/layers.hpp"
#include "gse/score.hpp"
#include "gse/sde.hpp"

namespace gse::nn {

/// Sinusoidal features of the diffusion time on a fixed geometric frequency ladder.
class TimeEmbedding {
public:
    explicit TimeEmbedding(std::size_t dim = 32, double min_freq = 1.0, double max_freq = 200.0) : dim_(dim) {
        if (dim == 0 || dim % 2 != 0) throw ConfigError("TimeEmbedding: dim must be a positive even number");
        const std::size_t half = dim / 2;
        frequencies_.resize(half);
        for (std::size_t k = 0; k < half; ++k) {
            const double frac = half > 1 ? static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
            frequencies_[k] = min_freq * std::pow(max_freq / min_freq, frac);
        }
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<double>& frequencies() const noexcept { return frequencies_; }

    void embed(double t, std::span<double> out) const noexcept {
        const std::size_t half = frequencies_.size();
        for (std::size_t k = 0; k < half; ++k) {
            out[k] = std::sin(frequencies_[k] * t);
            out[half + k] = std::cos(frequencies_[k] * t);
        }
    }

    [[nodiscard]] std::vector<double> operator()(double t) const {
        std::vector<double> out(dim_);
        embed(t, out);
        return out;
    }

private:
    std::size_t dim_;
    std::vector<double> frequencies_;
};

/// Per-frame cached activations of FrameNet.
struct FrameTape {
    std::size_t frames = 0;
    std::vector<double> features;             // frames x feature_dim
    std::vector<double> enc;                  // frames x hidden (post tanh)
    std::vector<double> cat;                  // frames x (hidden + memory)
    std::vector<double> dec;                  // frames x hidden (post tanh)
    std::vector<GruCell::Step> cell;
};

/// Framewise encoder, unidirectional gated memory across frames, framewise decoder:
///   e_k = tanh(E f_k), h_k = GRU(e_k, h_{k-1}), d_k = tanh(D [e_k, h_k]), o_k = O d_k.
/// Frames are processed strictly in order, so running two consecutive pieces
/// with the carried memory equals running their concatenation.
class FrameNet {
public:
    FrameNet() = default;
    FrameNet(std::size_t feature_dim, std::size_t frame_size, std::size_t hidden, std::size_t memory,
             ParamLayout& layout)
        : feature_dim_(feature_dim),
          frame_size_(frame_size),
          hidden_(hidden),
          memory_(memory),
          enc_(feature_dim, hidden, layout),
          cell_(hidden, memory, layout),
          dec_(hidden + memory, hidden, layout),
          out_(hidden, frame_size, layout) {}

    [[nodiscard]] std::size_t feature_dim() const noexcept { return feature_dim_; }
    [[nodiscard]] std::size_t frame_size() const noexcept { return frame_size_; }
    [[nodiscard]] std::size_t memory() const noexcept { return memory_; }
    [[nodiscard]] const Dense& output_layer() const noexcept { return out_; }

    [[nodiscard]] std::int64_t macs_per_frame() const noexcept {
        return enc_.macs() + cell_.macs() + dec_.macs() + out_.macs();
    }

    void init(std::span<double> params, RandomSource& rng, double output_scale) const {
        enc_.init(params, rng);
        cell_.init(params, rng);
        dec_.init(params, rng);
        out_.init(params, rng, output_scale);
    }

    /// `state` holds h_{-1} on entry and the last memory on exit.
    void forward(std::span<const double> params, std::span<const double> features, std::size_t frames,
                 std::span<double> state, std::span<double> out, FrameTape* tape) const {
        const std::size_t H = hidden_, M = memory_, F = frame_size_, D = feature_dim_;
        std::vector<double> e(H), cat(H + M), d(H), h_next(M);
        if (tape != nullptr) {
            tape->frames = frames;
            tape->features.assign(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(frames * D));
            tape->enc.resize(frames * H);
            tape->cat.resize(frames * (H + M));
            tape->dec.resize(frames * H);
            tape->cell.resize(frames);
        }
        for (std::size_t k = 0; k < frames; ++k) {
            enc_.forward(params, features.subspan(k * D, D), e);
            tanh_forward(e);
            cell_.forward(params, e, state, h_next, tape != nullptr ? &tape->cell[k] : nullptr);
            std::copy(h_next.begin(), h_next.end(), state.begin());
            std::copy(e.begin(), e.end(), cat.begin());
            std::copy(h_next.begin(), h_next.end(), cat.begin() + static_cast<std::ptrdiff_t>(H));
            dec_.forward(params, cat, d);
            tanh_forward(d);
            out_.forward(params, d, out.subspan(k * F, F));
            if (tape != nullptr) {
                std::copy(e.begin(), e.end(), tape->enc.begin() + static_cast<std::ptrdiff_t>(k * H));
                std::copy(cat.begin(), cat.end(), tape->cat.begin() + static_cast<std::ptrdiff_t>(k * (H + M)));
                std::copy(d.begin(), d.end(), tape->dec.begin() + static_cast<std::ptrdiff_t>(k * H));
            }
        }
    }

    /// Backpropagation through time over the taped frames. The incoming state is
    /// treated as a constant. When `dfeatures` is non-empty it accumulates the
    /// gradient with respect to the input features.
    void backward(std::span<const double> params, const FrameTape& tape, std::span<const double> dout,
                  std::span<double> grad, std::span<double> dfeatures = {}) const {
        const std::size_t H = hidden_, M = memory_, F = frame_size_, D = feature_dim_;
        std::vector<double> dd(H), dd_pre(H), dcat(H + M), de_pre(H), dh_carry(M, 0.0), dh_next(M), dh_prev(M);
        for (std::size_t kk = tape.frames; kk-- > 0;) {
            const auto d = std::span<const double>(tape.dec).subspan(kk * H, H);
            const auto cat = std::span<const double>(tape.cat).subspan(kk * (H + M), H + M);
            const auto e = std::span<const double>(tape.enc).subspan(kk * H, H);
            std::fill(dd.begin(), dd.end(), 0.0);
            out_.backward(params, d, dout.subspan(kk * F, F), dd, grad);
            std::fill(dd_pre.begin(), dd_pre.end(), 0.0);
            tanh_backward(d, dd, dd_pre);
            std::fill(dcat.begin(), dcat.end(), 0.0);
            dec_.backward(params, cat, dd_pre, dcat, grad);
            for (std::size_t i = 0; i < M; ++i) dh_next[i] = dcat[H + i] + dh_carry[i];
            std::span<double> de(dcat.data(), H);
            cell_.backward(params, tape.cell[kk], dh_next, de, dh_prev, grad);
            std::fill(de_pre.begin(), de_pre.end(), 0.0);
            tanh_backward(e, de, de_pre);
            enc_.backward(params, std::span<const double>(tape.features).subspan(kk * D, D), de_pre,
                          dfeatures.empty() ? std::span<double>{} : dfeatures.subspan(kk * D, D), grad);
            dh_carry = dh_prev;
        }
    }

private:
    std::size_t feature_dim_ = 0, frame_size_ = 0, hidden_ = 0, memory_ = 0;
    Dense enc_;
    GruCell cell_;
    Dense dec_;
    Dense out_;
};

// ---------------------------------------------------------------------------

struct NetShape {
    std::size_t frame_size = 32;
    std::size_t hidden = 64;
    std::size_t memory = 32;

    void validate() const {
        if (frame_size == 0 || hidden == 0 || memory == 0) throw ConfigError("network dimensions must be positive");
    }
};

namespace detail {

inline std::size_t frame_count(std::size_t length, std::size_t frame_size, const char* what) {
    if (length == 0 || length % frame_size != 0) {
        throw DimensionError(std::string(what) + ": length " + std::to_string(length) +
                             " is not a positive multiple of frame size " + std::to_string(frame_size));
    }
    return length / frame_size;
}

}  // namespace detail

/// Cached values of one ScoreNet forward, used for training.
struct ScoreTape {
    FrameTape core;
    double sigma = 0.0;
};

/// Learned score s(x_t, y, t, H). The network predicts the standardized noise
/// eps and the score is -eps / sigma(t). Inputs per frame are the residual
/// (x_t - y) scaled by the expected marginal spread, the noisy frame y, and a
/// time embedding.
class ScoreNet {
public:
    struct Config {
        NetShape shape{};
        std::size_t embed_dim = 32;
        /// Nominal rms of the corruption y - x_0, used only for input scaling.
        double noise_scale = 0.2;
    };

    ScoreNet(Config cfg, SdeParams sde, std::uint64_t seed = 0) : cfg_(cfg), sde_(sde), embedding_(cfg.embed_dim) {
        cfg_.shape.validate();
        sde_.validate();
        core_ = FrameNet(2 * cfg_.shape.frame_size + cfg_.embed_dim, cfg_.shape.frame_size, cfg_.shape.hidden,
                         cfg_.shape.memory, layout_);
        params_.assign(layout_.size(), 0.0);
        initialize(seed);
    }

    void initialize(std::uint64_t seed) {
        RandomSource rng(seed, 0x5c0e);
        core_.init(params_, rng, 0.1);
    }

    [[nodiscard]] const Config& config() const noexcept { return cfg_; }
    [[nodiscard]] const SdeParams& sde() const noexcept { return sde_; }
    [[nodiscard]] const FrameNet& core() const noexcept { return core_; }
    [[nodiscard]] std::size_t frame_size() const noexcept { return cfg_.shape.frame_size; }
    [[nodiscard]] std::size_t state_size() const noexcept { return cfg_.shape.memory; }
    [[nodiscard]] std::vector<double>& params() noexcept { return params_; }
    [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }

    [[nodiscard]] std::int64_t macs(std::size_t length) const {
        return static_cast<std::int64_t>(detail::frame_count(length, frame_size(), "ScoreNet")) *
               core_.macs_per_frame();
    }

    /// `state` is read and advanced in place (size state_size()).
    void forward(std::span<const double> x_t, std::span<const double> y, double t, std::span<double> state,
                 std::span<double> score, ScoreTape* tape = nullptr) const {
        gse::detail::require_same_length(x_t.size(), y.size(), "ScoreNet");
        gse::detail::require_same_length(x_t.size(), score.size(), "ScoreNet");
        gse::detail::require_same_length(state.size(), state_size(), "ScoreNet state");
        const std::size_t F = frame_size();
        const std::size_t frames = detail::frame_count(x_t.size(), F, "ScoreNet");
        const std::size_t E = cfg_.embed_dim;
        const std::size_t D = 2 * F + E;

        const double s = sigma(t, sde_);
        if (!(s > 0.0)) throw DomainError("ScoreNet: zero variance at t=" + std::to_string(t));
        const double a = clean_weight(t, sde_);
        const double in_scale = 1.0 / std::sqrt(s * s + a * a * cfg_.noise_scale * cfg_.noise_scale);

        std::vector<double> emb(E);
        embedding_.embed(t, emb);
        std::vector<double> features(frames * D);
        for (std::size_t k = 0; k < frames; ++k) {
            double* f = features.data() + k * D;
            for (std::size_t i = 0; i < F; ++i) {
                f[i] = (x_t[k * F + i] - y[k * F + i]) * in_scale;
                f[F + i] = y[k * F + i];
            }
            std::copy(emb.begin(), emb.end(), f + 2 * F);
        }
        core_.forward(params_, features, frames, state, score, tape != nullptr ? &tape->core : nullptr);
        for (auto& v : score) v = -v / s;
        if (tape != nullptr) tape->sigma = s;
    }

    /// Gradient of a loss given dL/dscore.
    void backward(const ScoreTape& tape, std::span<const double> dscore, std::span<double> grad) const {
        std::vector<double> deps(dscore.size());
        for (std::size_t i = 0; i < dscore.size(); ++i) deps[i] = -dscore[i] / tape.sigma;
        core_.backward(params_, tape.core, deps, grad);
    }

    /// Convenience form returning (score, next state).
    [[nodiscard]] std::pair<std::vector<double>, HistoryState> forward_score(std::span<const double> x_t,
                                                                           std::span<const double> y, double t,
                                                                           const HistoryState& state) const {
        HistoryState next = state.empty() ? HistoryState(state_size(), 0.0) : state;
        std::vector<double> score(x_t.size());
        forward(x_t, y, t, next, score);
        return {std::move(score), std::move(next)};
    }

private:
    Config cfg_;
    SdeParams sde_;
    TimeEmbedding embedding_;
    ParamLayout layout_;
    FrameNet core_;
    std::vector<double> params_;
};

/// Discriminative enhancement network: same structure without time conditioning,
/// mapping noisy frames to clean-signal estimates.
class DenoiserNet {
public:
    struct Config {
        NetShape shape{};
    };

    explicit DenoiserNet(Config cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.shape.validate();
        core_ = FrameNet(cfg_.shape.frame_size, cfg_.shape.frame_size, cfg_.shape.hidden, cfg_.shape.memory,
                         layout_);
        params_.assign(layout_.size(), 0.0);
        initialize(seed);
    }

    void initialize(std::uint64_t seed) {
        RandomSource rng(seed, 0xde0e);
        core_.init(params_, rng, 1.0);
    }

    [[nodiscard]] const Config& config() const noexcept { return cfg_; }
    [[nodiscard]] const FrameNet& core() const noexcept { return core_; }
    [[nodiscard]] std::size_t frame_size() const noexcept { return cfg_.shape.frame_size; }
    [[nodiscard]] std::size_t state_size() const noexcept { return cfg_.shape.memory; }
    [[nodiscard]] std::vector<double>& params() noexcept { return params_; }
    [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }

    [[nodiscard]] std::int64_t macs(std::size_t length) const {
        return static_cast<std::int64_t>(detail::frame_count(length, frame_size(), "DenoiserNet")) *
               core_.macs_per_frame();
    }

    void forward(std::span<const double> y, std::span<double> state, std::span<double> x_hat,
                 FrameTape* tape = nullptr) const {
        gse::detail::require_same_length(y.size(), x_hat.size(), "DenoiserNet");
        gse::detail::require_same_length(state.size(), state_size(), "DenoiserNet state");
        const std::size_t frames = detail::frame_count(y.size(), frame_size(), "DenoiserNet");
        core_.forward(params_, y, frames, state, x_hat, tape);
    }

    void backward(const FrameTape& tape, std::span<const double> dx_hat, std::span<double> grad) const {
        core_.backward(params_, tape, dx_hat, grad);
    }

    [[nodiscard]] std::pair<std::vector<double>, HistoryState> forward_denoise(std::span<const double> y,
                                                                             const HistoryState& state) const {
        HistoryState next = state.empty() ? HistoryState(state_size(), 0.0) : state;
        std::vector<double> out(y.size());
        forward(y, next, out);
        return {std::move(out), std::move(next)};
    }

private:
    Config cfg_;
    ParamLayout layout_;
    FrameNet core_;
    std::vector<double> params_;
};

}  // namespace gse::nn
