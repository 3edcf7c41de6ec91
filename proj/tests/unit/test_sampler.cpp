#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gse/nn/network.hpp"
#include "gse/nn/providers.hpp"
#include "gse/sampler.hpp"

namespace {

using gse::SdeParams;

class FixedScore final : public gse::ScoreProvider {
public:
    explicit FixedScore(double v) : v_(v) {}
    [[nodiscard]] gse::ScoreKind kind() const noexcept override { return gse::ScoreKind::Learned; }
    void evaluate(const gse::ScoreQuery& q, const gse::HistoryState*, gse::HistoryState*, std::span<double> out,
                  gse::CostLedger& ledger) const override {
        std::fill(out.begin(), out.end(), v_);
        ledger.score_net_forwards += 1;
        ledger.record_evaluation(gse::ScoreBranch::Learned, q.predictor);
    }

private:
    double v_;
};

gse::SamplerConfig sampler_for(const SdeParams& p, int correctors) {
    gse::SamplerConfig c;
    c.N = p.N;
    c.corrector_steps = correctors;
    return c;
}

TEST(Predictor, ZeroScoreAndNoDiffusionReversesDrift) {
    SdeParams p;
    p.sigma_max = p.sigma_min;
    gse::DiffusionState s{{0.2, -0.4}, 0.5};
    const std::vector<double> y{1.0, 0.0}, score{0.0, 0.0};
    gse::RandomSource rng(1);
    const double dt = 0.1;
    const auto next = gse::predictor_step(s, y, score, p, dt, rng);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(next.x[i], s.x[i] - p.gamma * (y[i] - s.x[i]) * dt, 1e-15);
    EXPECT_NEAR(next.t, 0.4, 1e-15);
}

TEST(Predictor, CannotStepPastZero) {
    SdeParams p;
    gse::DiffusionState s{{0.0}, 0.05};
    gse::RandomSource rng(1);
    EXPECT_THROW((void)gse::predictor_step(s, std::vector<double>{0.0}, std::vector<double>{0.0}, p, 0.1, rng),
                 gse::DomainError);
}

TEST(Predictor, OneStepOneEvaluation) {
    SdeParams p;
    p.N = 1;
    FixedScore score(0.0);
    gse::RandomSource rng(2);
    const std::vector<double> y{0.1, 0.2};
    const auto r = gse::reverse_process(y, score, {}, sampler_for(p, 0), p, rng);
    EXPECT_EQ(r.ledger.steps(gse::ScoreBranch::Learned), 1);
    EXPECT_EQ(r.ledger.score_net_forwards, 1);
}

TEST(Corrector, ZeroNoiseGivesZeroAdaptiveStep) {
    const std::vector<double> z{0.0, 0.0}, s{3.0, -1.0};
    const double eps = gse::langevin_step_size(gse::CorrectorRule::SnrAdaptive, 0.5, 0.1, z, s);
    EXPECT_EQ(eps, 0.0);
    std::vector<double> x{0.4, 0.5};
    gse::langevin_update(x, s, z, eps);
    EXPECT_EQ(x, (std::vector<double>{0.4, 0.5}));
}

TEST(Corrector, StepSizeRules) {
    const std::vector<double> z{3.0, 4.0}, s{0.0, 10.0};
    EXPECT_DOUBLE_EQ(gse::langevin_step_size(gse::CorrectorRule::SnrAdaptive, 0.5, 0.1, z, s), 2.0 * 0.25 * 0.25);
    EXPECT_DOUBLE_EQ(gse::langevin_step_size(gse::CorrectorRule::Annealed, 0.5, 0.1, z, s), 2.0 * 0.05 * 0.05);
}

TEST(Corrector, EachSubStepIsOneEvaluation) {
    SdeParams p;
    p.N = 10;
    FixedScore score(1.0);
    gse::RandomSource rng(3);
    const std::vector<double> y{0.1};
    const auto r = gse::reverse_process(y, score, {}, sampler_for(p, 3), p, rng);
    EXPECT_EQ(r.ledger.score_net_forwards, 40);
    EXPECT_EQ(r.ledger.steps(gse::ScoreBranch::Learned), 10);
    EXPECT_EQ(r.ledger.evaluations[0], 40);
}

TEST(Corrector, ZeroScoreSkipsAdaptiveStep) {
    SdeParams p;
    p.N = 5;
    FixedScore score(0.0);
    auto cfg = sampler_for(p, 2);
    cfg.corrector_rule = gse::CorrectorRule::SnrAdaptive;
    gse::RandomSource rng(3);
    const auto r = gse::reverse_process(std::vector<double>{0.3}, score, {}, cfg, p, rng);
    EXPECT_EQ(r.ledger.skipped_correctors, 10);
}

// Starting from a too-wide ensemble at fixed t, Langevin sub-steps with the exact
// score pull the histogram toward the analytic marginal.
TEST(Corrector, MovesEnsembleTowardMarginal) {
    SdeParams p;
    const double t = 0.8, var0 = 1e-3;
    const int M = 20000;
    const gse::GaussianPrior0 prior{std::vector<double>(M, 0.2), var0};
    const std::vector<double> y(M, 0.0);
    gse::AnalyticGaussianScore score(prior, p);
    const double mu = gse::mean(std::vector<double>{0.2}, std::vector<double>{0.0}, t, p)[0];
    const double v = gse::gaussian_marginal_variance(t, var0, p);
    gse::RandomSource rng(8);
    gse::DiffusionState s{std::vector<double>(M), t};
    for (auto& x : s.x) x = mu + 3.0 * std::sqrt(v) * rng.normal();

    auto l1_to_density = [&](const std::vector<double>& xs) {
        const int bins = 60;
        const double lo = mu - 6 * std::sqrt(v), w = 12 * std::sqrt(v) / bins;
        std::vector<double> h(bins, 0.0);
        for (double x : xs) {
            const int b = static_cast<int>(std::floor((x - lo) / w));
            if (b >= 0 && b < bins) h[b] += 1.0 / (M * w);
        }
        double d = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double c = lo + (b + 0.5) * w;
            const double pdf = std::exp(-0.5 * (c - mu) * (c - mu) / v) / std::sqrt(2 * M_PI * v);
            d += std::abs(h[b] - pdf) * w;
        }
        return d;
    };
    const double before = l1_to_density(s.x);
    gse::SamplerConfig cfg;
    gse::CostLedger ledger;
    const gse::ScoreQuery base{s.x, y, t, 0, false, {}};
    for (int k = 0; k < 10; ++k) gse::corrector_step(s, y, score, base, nullptr, cfg, p, rng, ledger);
    const double after = l1_to_density(s.x);
    EXPECT_LT(after, 0.5 * before);
    EXPECT_EQ(ledger.evaluations[static_cast<int>(gse::ScoreBranch::Analytic)], 10);
}

TEST(ReverseProcess, GaussianToyRecoversCleanDistribution) {
    SdeParams p;
    p.N = 200;
    const int M = 4000;
    const double m0 = 1.0, var0 = 0.01;
    const gse::GaussianPrior0 prior{std::vector<double>(M, m0), var0};
    gse::AnalyticGaussianScore score(prior, p);
    const std::vector<double> y(M, 0.8);
    gse::RandomSource rng(10);
    const auto r = gse::reverse_process(y, score, {}, sampler_for(p, 1), p, rng);
    double sum = 0.0, sq = 0.0;
    for (double v : r.x) {
        sum += v;
        sq += v * v;
    }
    const double mean = sum / M, var = sq / M - mean * mean;
    EXPECT_NEAR(mean / m0, 1.0, 0.02);
    EXPECT_NEAR(var / var0, 1.0, 0.1);
}

TEST(ReverseProcess, SeedDeterminism) {
    SdeParams p;
    p.N = 12;
    const gse::GaussianPrior0 prior{{0.1, 0.2, 0.3}, 0.01};
    gse::AnalyticGaussianScore score(prior, p);
    const std::vector<double> y{0.0, 0.5, -0.5};
    gse::RandomSource a(42), b(42), c(43);
    const auto ra = gse::reverse_process(y, score, {}, sampler_for(p, 1), p, a);
    const auto rb = gse::reverse_process(y, score, {}, sampler_for(p, 1), p, b);
    const auto rc = gse::reverse_process(y, score, {}, sampler_for(p, 1), p, c);
    EXPECT_EQ(ra.x, rb.x);
    EXPECT_NE(ra.x, rc.x);
}

TEST(ReverseProcess, FullGuidanceConvergesToDenoiserEstimate) {
    SdeParams p;
    gse::RandomSource rng(4);
    std::vector<double> y(256), xd(256);
    for (std::size_t i = 0; i < y.size(); ++i) {
        xd[i] = 0.3 * std::sin(0.05 * static_cast<double>(i));
        y[i] = xd[i] + 0.1 * rng.normal();
    }
    FixedScore unused(0.0);
    gse::HybridScore hybrid(unused, gse::schedule_from_n_phi(p.N, p), p);
    const auto r = gse::reverse_process(y, hybrid, gse::Guidance{nullptr, xd}, sampler_for(p, 1), p, rng);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (r.x[i] - xd[i]) * (r.x[i] - xd[i]);
        den += xd[i] * xd[i];
    }
    EXPECT_LT(std::sqrt(num / den), 0.05);
    EXPECT_EQ(r.ledger.score_net_forwards, 0);
    EXPECT_EQ(r.ledger.steps(gse::ScoreBranch::Discriminative), p.N);
}

TEST(ReverseProcess, CountsFollowSchedule) {
    SdeParams p;
    gse::nn::ScoreNet net({{8, 8, 4}, 8, 0.2}, p, 1);
    gse::nn::DenoiserNet den_net({{8, 8, 4}}, 2);
    gse::nn::LearnedScore learned(net);
    gse::nn::NetDenoiser den(den_net);
    const std::vector<double> y(64, 0.1);
    const gse::HybridScore hybrid(learned, gse::schedule_from_n_phi(12, p), p);
    gse::RandomSource rng(1);
    const auto r = gse::reverse_process(y, hybrid, gse::Guidance{&den, {}}, sampler_for(p, 1), p, rng);
    EXPECT_EQ(r.ledger.score_net_forwards, 36);
    EXPECT_EQ(r.ledger.denoiser_forwards, 1);
    EXPECT_EQ(r.ledger.steps(gse::ScoreBranch::Learned), 18);
    EXPECT_EQ(r.ledger.steps(gse::ScoreBranch::Discriminative), 12);
    EXPECT_EQ(r.ledger.mac_total, 36 * net.macs(64) + den_net.macs(64));
}

TEST(ReverseProcess, MacsAreAffineInGuidedSteps) {
    SdeParams p;
    p.N = 8;
    gse::nn::ScoreNet net({{8, 8, 4}, 8, 0.2}, p, 1);
    gse::nn::DenoiserNet den_net({{8, 8, 4}}, 2);
    gse::nn::LearnedScore learned(net);
    gse::nn::NetDenoiser den(den_net);
    const std::vector<double> y(32, 0.1);
    std::vector<std::int64_t> macs;
    for (int n_phi = 0; n_phi <= p.N; ++n_phi) {
        const gse::HybridScore hybrid(learned, gse::schedule_from_n_phi(n_phi, p), p);
        gse::RandomSource rng(1);
        macs.push_back(
            gse::reverse_process(y, hybrid, gse::Guidance{&den, {}}, sampler_for(p, 2), p, rng).ledger.mac_total);
    }
    const std::int64_t slope = macs[1] - macs[0];
    EXPECT_EQ(slope, -3 * net.macs(32));
    for (std::size_t k = 1; k < macs.size(); ++k) EXPECT_EQ(macs[k] - macs[k - 1], slope);
}

TEST(ReverseProcess, GuidanceApproachesEstimateAsMoreStepsAreGuided) {
    SdeParams p;
    const std::size_t L = 64;
    std::vector<double> xd(L), y(L), m0(L);
    for (std::size_t i = 0; i < L; ++i) {
        xd[i] = 0.3 * std::sin(0.2 * static_cast<double>(i));
        m0[i] = 0.0;
        y[i] = xd[i] + 0.05 * std::cos(0.7 * static_cast<double>(i));
    }
    gse::AnalyticGaussianScore stand_in(gse::GaussianPrior0{m0, 0.01}, p);
    double prev = std::numeric_limits<double>::infinity();
    for (int n_phi : {0, 6, 12, 18, 24, 30}) {
        const gse::HybridScore hybrid(stand_in, gse::schedule_from_n_phi(n_phi, p), p);
        std::vector<double> d;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            gse::RandomSource rng(seed);
            const auto r = gse::reverse_process(y, hybrid, gse::Guidance{nullptr, xd}, sampler_for(p, 1), p, rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < L; ++i) acc += (r.x[i] - xd[i]) * (r.x[i] - xd[i]);
            d.push_back(std::sqrt(acc));
        }
        std::nth_element(d.begin(), d.begin() + 10, d.end());
        EXPECT_LE(d[10], prev) << "n_phi=" << n_phi;
        prev = d[10];
    }
}

class NanScore final : public gse::ScoreProvider {
public:
    [[nodiscard]] gse::ScoreKind kind() const noexcept override { return gse::ScoreKind::Learned; }
    void evaluate(const gse::ScoreQuery& q, const gse::HistoryState*, gse::HistoryState*, std::span<double> out,
                  gse::CostLedger&) const override {
        std::fill(out.begin(), out.end(), q.step <= 20 ? std::nan("") : 0.0);
    }
};

TEST(ReverseProcess, NonFiniteStateNamesTheStep) {
    SdeParams p;
    NanScore score;
    gse::RandomSource rng(1);
    try {
        (void)gse::reverse_process(std::vector<double>{0.1}, score, {}, sampler_for(p, 0), p, rng);
        FAIL() << "expected a numerical error";
    } catch (const gse::NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("step 20"), std::string::npos) << e.what();
    }
}

TEST(ReverseProcess, RejectsMismatchedStepCount) {
    SdeParams p;
    FixedScore score(0.0);
    auto cfg = sampler_for(p, 1);
    cfg.N = 10;
    gse::RandomSource rng(1);
    EXPECT_THROW((void)gse::reverse_process(std::vector<double>{0.1}, score, {}, cfg, p, rng), gse::ConfigError);
}

TEST(ReverseProcess, GuidedProviderNeedsEstimate) {
    SdeParams p;
    FixedScore learned(0.0);
    const gse::HybridScore hybrid(learned, gse::schedule_from_n_phi(3, p), p);
    gse::RandomSource rng(1);
    EXPECT_THROW((void)gse::reverse_process(std::vector<double>{0.1}, hybrid, {}, sampler_for(p, 1), p, rng),
                 gse::ConfigError);
}

}  // namespace
