#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "gse/gse.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

gse::audio::MixPair test_pair(int u) {
    gse::audio::MixSpec m;
    m.seed = 900000 + static_cast<std::uint64_t>(u);
    m.snr_db = 5.0;
    m.duration_s = 0.5;
    return gse::audio::synthesize_pair(m);
}

struct Models {
    gse::nn::ScoreNet score;
    gse::nn::DenoiserNet denoiser;
    double train_s = 0.0;
};

Models train_models() {
    const auto t0 = Clock::now();
    gse::SdeParams p;
    std::vector<gse::nn::TrainingPair> utterances;
    for (int i = 0; i < 64; ++i) {
        gse::audio::MixSpec m;
        m.seed = 1000 + static_cast<std::uint64_t>(i);
        m.snr_db = 5.0;
        m.duration_s = 0.5;
        const auto pr = gse::audio::synthesize_pair(m);
        utterances.push_back(gse::normalized_pair(pr.x0.samples, pr.y.samples));
    }
    const gse::nn::SegmentDataset data(std::move(utterances), 512);
    Models m{gse::nn::ScoreNet({}, p, 3), gse::nn::DenoiserNet({}, 1)};
    gse::nn::TrainConfig dc;
    dc.steps = 1500;
    dc.learning_rate = 3e-3;
    dc.seed = 2;
    (void)gse::nn::train(m.denoiser, data, dc);
    gse::nn::TrainConfig sc;
    sc.steps = 6000;
    sc.learning_rate = 3e-3;
    sc.seed = 4;
    (void)gse::nn::train(m.score, data, sc);
    m.train_s = seconds_since(t0);
    return m;
}

Outcome kernel_monte_carlo() {
    gse::SdeParams p;
    const int paths = 10000, steps = 2000;
    const std::vector<double> x0(paths, 1.0), y(paths, 0.2);
    gse::RandomSource rng(101);
    const auto snaps = gse::euler_maruyama_snapshots(x0, y, p, steps, steps / 10, rng);
    double worst_mean = 0.0, worst_var = 0.0;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const double t = p.T * static_cast<double>(k + 1) / 10.0;
        double sum = 0.0, sq = 0.0;
        for (double v : snaps[k]) sum += v;
        const double m = sum / paths;
        for (double v : snaps[k]) sq += (v - m) * (v - m);
        const double var = sq / (paths - 1);
        const double m_ref = gse::mean(std::vector<double>{1.0}, std::vector<double>{0.2}, t, p)[0];
        worst_mean = std::max(worst_mean, std::abs(m - m_ref) / std::abs(m_ref));
        worst_var = std::max(worst_var, std::abs(var / gse::variance(t, p) - 1.0));
    }
    return {worst_mean < 0.01 && worst_var < 0.05,
            fmt("max rel mean err %.2e (<1e-2), max rel var err %.2e (<5e-2)", worst_mean, worst_var)};
}

Outcome variance_ode() {
    gse::SdeParams p;
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k <= 200; ++k) {
        const double t = std::min(0.05 + 0.95 * k / 200.0, p.T - h);
        const double fd = (gse::variance(t + h, p) - gse::variance(t - h, p)) / (2 * h);
        const double g = gse::diffusion_coeff(t, p);
        const double rhs = -2.0 * p.gamma * gse::variance(t, p) + g * g;
        worst = std::max(worst, std::abs(fd - rhs) / std::abs(rhs));
    }
    return {worst < 1e-3, fmt("max rel err %.2e (<1e-3)", worst)};
}

Outcome oracle_identity() {
    gse::SdeParams p;
    gse::RandomSource rng(303);
    double worst = 0.0;
    for (int c = 0; c < 1000; ++c) {
        const double t = rng.uniform(p.t_eps, p.T);
        const std::size_t n = 1 + rng.next_u64() % 64;
        std::vector<double> x0(n), y(n);
        for (auto& v : x0) v = rng.uniform(-1.0, 1.0);
        for (auto& v : y) v = rng.uniform(-1.0, 1.0);
        const auto s = gse::sample_perturbed(x0, y, t, p, rng);
        const auto score = gse::discriminative_score(s.x_t, y, t, x0, p);
        const double sd = gse::sigma(t, p);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(score[i] + s.z[i] / sd));
    }
    return {worst <= 1e-12, fmt("max abs err %.2e (<=1e-12)", worst)};
}

Outcome sampler_toy() {
    gse::SdeParams p;
    p.N = 200;
    const int M = 10000;
    const double m0 = 1.0, var0 = 0.01;
    const gse::GaussianPrior0 prior{std::vector<double>(M, m0), var0};
    const gse::AnalyticGaussianScore score(prior, p);
    const std::vector<double> y(M, 0.8);
    gse::SamplerConfig cfg;
    cfg.N = p.N;
    cfg.corrector_steps = 1;
    gse::RandomSource rng(404);
    const auto r = gse::reverse_process(y, score, {}, cfg, p, rng);
    double sum = 0.0, sq = 0.0;
    for (double v : r.x) sum += v;
    const double m = sum / M;
    for (double v : r.x) sq += (v - m) * (v - m);
    const double var = sq / (M - 1);
    const double em = std::abs(m / m0 - 1.0), ev = std::abs(var / var0 - 1.0);
    return {em < 0.02 && ev < 0.10, fmt("mean %.4f (rel %.2e <2e-2), var %.5f (rel %.2e <1e-1)", m, em, var, ev)};
}

Outcome convergence_to_estimate(const Models& m) {
    gse::SdeParams p;
    const gse::nn::LearnedScore learned(m.score);
    const gse::HybridScore hybrid(learned, gse::schedule_from_n_phi(p.N, p), p);
    const gse::nn::NetDenoiser den(m.denoiser);
    gse::SamplerConfig cfg;
    double worst = 0.0;
    for (int u = 0; u < 20; ++u) {
        const auto pr = test_pair(u);
        std::vector<double> y = pr.y.samples;
        const double g = gse::peak_gain(y);
        for (auto& v : y) v *= g;
        const auto r = gse::enhance_offline(y, hybrid, &den, cfg, p, static_cast<std::uint64_t>(u));
        worst = std::max(worst, gse::distance2(r.x, r.x_d) / gse::norm2(r.x_d));
    }
    return {worst < 0.05, fmt("max ||x - x_D|| / ||x_D|| = %.4f (<0.05)", worst)};
}

Outcome cost_law(const Models& m) {
    gse::SdeParams p;
    const auto pr = test_pair(0);
    std::vector<std::int64_t> macs;
    bool counts_ok = true;
    for (int n_phi = 0; n_phi <= p.N; ++n_phi) {
        gse::EnhanceOptions o;
        o.n_phi = n_phi;
        o.mode = gse::EnhanceMode::Hybrid;
        const auto r = gse::enhance(pr.y, &m.score, &m.denoiser, o);
        counts_ok = counts_ok && r.ledger.score_net_forwards == (1 + o.sampler.corrector_steps) * (p.N - n_phi) &&
                    r.ledger.denoiser_forwards <= 1;
        macs.push_back(r.ledger.mac_total);
    }
    const std::int64_t slope = macs[1] - macs[0];
    std::int64_t worst_residual = 0;
    for (std::size_t k = 0; k < macs.size(); ++k) {
        const std::int64_t fit = macs[0] + slope * static_cast<std::int64_t>(k);
        worst_residual = std::max(worst_residual, std::abs(macs[k] - fit));
    }
    return {counts_ok && slope < 0 && worst_residual == 0,
            fmt("MACs %lld -> %lld, slope %lld per step, max residual %lld, forward counts %s",
                static_cast<long long>(macs.front()), static_cast<long long>(macs.back()),
                static_cast<long long>(slope), static_cast<long long>(worst_residual), counts_ok ? "exact" : "wrong")};
}

Outcome gradients() {
    const auto checks = gse::testing::run_layer_gradient_checks(50, 707);
    double worst = 0.0;
    std::string worst_name;
    for (const auto& c : checks) {
        if (c.worst >= worst) {
            worst = c.worst;
            worst_name = c.name;
        }
    }
    return {worst < 1e-4, fmt("%zu layers, worst rel err %.2e in %s (<1e-4)", checks.size(), worst, worst_name.c_str())};
}

Outcome end_to_end(const Models& m) {
    struct Variant {
        const char* name;
        int n_phi;
        gse::EnhanceMode mode;
    };
    const Variant variants[] = {{"generative", 0, gse::EnhanceMode::Auto},
                                {"discriminative", 0, gse::EnhanceMode::DenoiserOnly},
                                {"hybrid n_phi=12", 12, gse::EnhanceMode::Auto}};
    bool pass = true;
    std::string detail = fmt("training %.0fs;", m.train_s);
    for (const auto& v : variants) {
        std::vector<double> gains;
        for (int u = 0; u < 20; ++u) {
            const auto pr = test_pair(u);
            gse::EnhanceOptions o;
            o.n_phi = v.n_phi;
            o.mode = v.mode;
            o.seed = static_cast<std::uint64_t>(u);
            const auto r = gse::enhance(pr.y, &m.score, &m.denoiser, o);
            gains.push_back(gse::audio::sdr_db(pr.x0.samples, r.x.samples) -
                            gse::audio::sdr_db(pr.x0.samples, pr.y.samples));
        }
        const double med = median(gains);
        pass = pass && med >= 3.0;
        detail += fmt(" %s median gain %+.2f dB;", v.name, med);
    }
    return {pass, detail + " (>= +3 dB each)"};
}

Outcome streaming_contract(const Models& m) {
    gse::SdeParams p;
    const gse::StreamConfig sc;
    const std::size_t K = sc.chunk_size();
    const gse::nn::LearnedScore learned(m.score);
    const gse::HybridScore hybrid(learned, gse::schedule_from_n_phi(12, p), p);
    const gse::nn::NetDenoiser den(m.denoiser);
    gse::SamplerConfig cfg;

    auto a = test_pair(0).y.samples;
    auto b = a;
    for (std::size_t i = 2 * K; i < b.size(); ++i) b[i] = -0.5 * b[i] + 0.01;
    const auto ra = gse::enhance_stream(a, sc, hybrid, &den, cfg, p, 9);
    const auto rb = gse::enhance_stream(b, sc, hybrid, &den, cfg, p, 9);
    const bool causal = std::equal(ra.x.begin(), ra.x.begin() + static_cast<std::ptrdiff_t>(2 * K), rb.x.begin());

    gse::StreamEnhancer live(sc, hybrid, &den, cfg, p, 9);
    live.push(std::vector<double>(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(K)));
    const bool bank_ok = live.bank().score_states().size() == static_cast<std::size_t>(p.N) && live.bank().size() ==
                         static_cast<std::size_t>(p.N);

    std::vector<double> diffs, stream_sdr, offline_sdr;
    for (int u = 0; u < 20; ++u) {
        const auto pr = test_pair(u);
        gse::EnhanceOptions o;
        o.n_phi = 12;
        o.seed = static_cast<std::uint64_t>(u);
        const auto off = gse::enhance(pr.y, &m.score, &m.denoiser, o);
        o.streaming = true;
        const auto on = gse::enhance(pr.y, &m.score, &m.denoiser, o);
        offline_sdr.push_back(gse::audio::sdr_db(pr.x0.samples, off.x.samples));
        stream_sdr.push_back(gse::audio::sdr_db(pr.x0.samples, on.x.samples));
    }
    const double gap = std::abs(median(stream_sdr) - median(offline_sdr));
    return {causal && bank_ok && gap <= 2.0,
            fmt("K=%zu, prefix %s, bank %s, median SDR stream %.2f dB vs offline %.2f dB (gap %.2f <= 2)", K,
                causal ? "bit-exact" : "CHANGED", bank_ok ? "holds N states" : "WRONG SIZE", median(stream_sdr),
                median(offline_sdr), gap)};
}

Outcome trend(const Models& m) {
    const int grid[] = {0, 6, 12, 18, 24, 30};
    const int utterances = 20, seeds = 20;
    std::vector<double> sdr_med, rtf_med;
    for (int n_phi : grid) {
        std::vector<double> sdr, rtf;
        for (int s = 0; s < seeds; ++s) {
            std::vector<double> per_seed;
            for (int u = 0; u < utterances; ++u) {
                const auto pr = test_pair(u);
                gse::EnhanceOptions o;
                o.n_phi = n_phi;
                o.seed = static_cast<std::uint64_t>(1000 * s + u);
                const auto r = gse::enhance(pr.y, &m.score, &m.denoiser, o);
                per_seed.push_back(gse::audio::sdr_db(pr.x0.samples, r.x.samples));
                rtf.push_back(r.rtf);
            }
            sdr.push_back(median(per_seed));
        }
        sdr_med.push_back(median(sdr));
        rtf_med.push_back(median(rtf));
    }
    bool sdr_ok = true, rtf_ok = true;
    std::string detail;
    for (std::size_t k = 0; k < sdr_med.size(); ++k) {
        if (k > 0) {
            sdr_ok = sdr_ok && sdr_med[k] >= sdr_med[k - 1];
            rtf_ok = rtf_ok && rtf_med[k] < rtf_med[k - 1];
        }
        detail += fmt("n_phi=%d: %.2f dB rtf %.4f; ", grid[k], sdr_med[k], rtf_med[k]);
    }
    return {sdr_ok && rtf_ok, detail + fmt("SDR %s, RTF %s", sdr_ok ? "nondecreasing" : "NOT nondecreasing",
                                            rtf_ok ? "strictly decreasing" : "NOT strictly decreasing")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s  criterion %2d  %-28s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    };

    report(1, "kernel monte carlo", kernel_monte_carlo);
    report(2, "variance ode", variance_ode);
    report(3, "oracle guidance identity", oracle_identity);
    report(4, "reverse sampler gaussian toy", sampler_toy);
    report(7, "layer gradients", gradients);

    const Models models = train_models();
    report(5, "convergence to x_D", [&] { return convergence_to_estimate(models); });
    report(6, "cost law", [&] { return cost_law(models); });
    report(8, "end-to-end enhancement", [&] { return end_to_end(models); });
    report(9, "streaming contract", [&] { return streaming_contract(models); });
    report(10, "trend over n_phi", [&] { return trend(models); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
