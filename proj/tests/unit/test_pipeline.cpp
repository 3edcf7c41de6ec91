#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gse/pipeline.hpp"

namespace {

struct Nets {
    gse::SdeParams p;
    gse::nn::ScoreNet score;
    gse::nn::DenoiserNet den;
    Nets() : p(params()), score({{8, 8, 4}, 8, 0.2}, p, 1), den({{8, 8, 4}}, 2) {}
    static gse::SdeParams params() {
        gse::SdeParams p;
        p.N = 5;
        return p;
    }
    gse::EnhanceOptions options() const {
        gse::EnhanceOptions o;
        o.sde = p;
        o.sampler.N = p.N;
        o.seed = 4;
        return o;
    }
};

gse::Signal noisy(std::size_t n, double amp) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = amp * std::sin(0.05 * static_cast<double>(i));
    return gse::Signal(std::move(v), 16000);
}

TEST(PeakGain, MapsPeakAndHandlesSilence) {
    const std::vector<double> y{0.1, -0.3};
    EXPECT_DOUBLE_EQ(gse::peak_gain(y), 3.0);
    EXPECT_EQ(gse::peak_gain(std::vector<double>{0.0, 0.0}), 1.0);
    const auto pair = gse::normalized_pair(std::vector<double>{0.2, 0.1}, y);
    EXPECT_DOUBLE_EQ(pair.x0[0], 0.6);
    EXPECT_DOUBLE_EQ(pair.y[1], -0.9);
}

TEST(Enhance, PureLearnedSkipsDenoiser) {
    Nets n;
    auto o = n.options();
    const auto r = gse::enhance(noisy(100, 0.2), &n.score, &n.den, o);
    EXPECT_EQ(r.ledger.denoiser_forwards, 0);
    EXPECT_EQ(r.ledger.score_net_forwards, 2 * n.p.N);
    EXPECT_EQ(r.x.size(), 100u);
    EXPECT_TRUE(gse::all_finite(r.x.samples));
    EXPECT_NO_THROW((void)gse::enhance(noisy(100, 0.2), &n.score, nullptr, o));
}

TEST(Enhance, HybridModeKeepsOneDenoiserPass) {
    Nets n;
    auto o = n.options();
    o.mode = gse::EnhanceMode::Hybrid;
    o.n_phi = 2;
    const auto r = gse::enhance(noisy(96, 0.2), &n.score, &n.den, o);
    EXPECT_EQ(r.ledger.denoiser_forwards, 1);
    EXPECT_EQ(r.ledger.score_net_forwards, 2 * (n.p.N - 2));
}

TEST(Enhance, NormalizationIsScaleEquivariant) {
    Nets n;
    auto o = n.options();
    o.mode = gse::EnhanceMode::DenoiserOnly;
    const auto ya = noisy(64, 0.1);
    const auto a = gse::enhance(ya, nullptr, &n.den, o);
    const auto b = gse::enhance(noisy(64, 0.4), nullptr, &n.den, o);
    EXPECT_DOUBLE_EQ(a.gain, 0.9 / gse::max_abs(ya.samples));
    for (std::size_t i = 0; i < a.x.size(); ++i) EXPECT_NEAR(4.0 * a.x.samples[i], b.x.samples[i], 1e-12);
}

TEST(Enhance, DenoiserOnlyStreamingMatchesOffline) {
    Nets n;
    auto o = n.options();
    o.mode = gse::EnhanceMode::DenoiserOnly;
    const auto y = noisy(200, 0.3);
    const auto off = gse::enhance(y, nullptr, &n.den, o);
    o.streaming = true;
    o.stream.chunk_ms = 4.0;
    const auto on = gse::enhance(y, nullptr, &n.den, o);
    EXPECT_EQ(on.chunk_size, 64u);
    ASSERT_TRUE(on.latency.has_value());
    EXPECT_EQ(on.latency->chunk_wall_ms.size(), 4u);
    EXPECT_EQ(off.ledger.score_net_forwards + on.ledger.score_net_forwards, 0);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(off.x.samples[i], on.x.samples[i], 1e-12);
}

TEST(Enhance, StreamingUsesChunkGrid) {
    Nets n;
    auto o = n.options();
    o.streaming = true;
    o.stream.chunk_ms = 4.0;
    const auto r = gse::enhance(noisy(150, 0.2), &n.score, &n.den, o);
    EXPECT_EQ(r.chunk_size, 64u);
    EXPECT_EQ(r.x.size(), 150u);
    EXPECT_EQ(r.ledger.score_net_forwards, 3 * 2 * n.p.N);
    EXPECT_GT(r.rtf, 0.0);
}

TEST(Enhance, RejectsMissingNetworksAndBadChunks) {
    Nets n;
    auto o = n.options();
    o.n_phi = 1;
    EXPECT_THROW((void)gse::enhance(noisy(64, 0.2), &n.score, nullptr, o), gse::ConfigError);
    o.n_phi = 0;
    EXPECT_THROW((void)gse::enhance(noisy(64, 0.2), nullptr, &n.den, o), gse::ConfigError);
    o.streaming = true;
    o.stream.chunk_ms = 0.25;
    EXPECT_THROW((void)gse::enhance(noisy(64, 0.2), &n.score, &n.den, o), gse::ConfigError);
    o.streaming = false;
    o.sampler.N = 7;
    EXPECT_THROW((void)gse::enhance(noisy(64, 0.2), &n.score, &n.den, o), gse::ConfigError);
}

}  // namespace
