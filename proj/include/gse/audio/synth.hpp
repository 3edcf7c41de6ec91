#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gse/audio/fft.hpp"
#include "gse/config.hpp"
#include "gse/error.hpp"
#include "gse/random.hpp"
#include "gse/signal.hpp"

namespace gse::audio {

enum class CleanKind { SinusoidSum, ArProcess, GaussianToy };
enum class NoiseKind { White, Pink };

inline constexpr const char* to_string(CleanKind k) noexcept {
    switch (k) {
        case CleanKind::SinusoidSum: return "sinusoid-sum";
        case CleanKind::ArProcess: return "ar-process";
        case CleanKind::GaussianToy: return "gaussian-toy";
    }
    return "?";
}

inline constexpr const char* to_string(NoiseKind k) noexcept {
    return k == NoiseKind::White ? "white" : "pink";
}

[[nodiscard]] inline CleanKind parse_clean_kind(const std::string& s) {
    if (s == "sinusoid-sum") return CleanKind::SinusoidSum;
    if (s == "ar-process") return CleanKind::ArProcess;
    if (s == "gaussian-toy") return CleanKind::GaussianToy;
    throw ConfigError("unknown clean kind: " + s);
}

[[nodiscard]] inline NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "white") return NoiseKind::White;
    if (s == "pink") return NoiseKind::Pink;
    throw ConfigError("unknown noise kind: " + s);
}

/// Recipe for one synthetic clean/noisy pair.
struct MixSpec {
    CleanKind clean = CleanKind::SinusoidSum;
    NoiseKind noise = NoiseKind::White;
    /// +inf means no noise.
    double snr_db = 5.0;
    double duration_s = 0.5;
    std::uint64_t seed = 0;
    int sample_rate = 16000;
    /// Rms level of the clean signal (sinusoid-sum and AR kinds).
    double level = 0.1;
    int partials = 3;
    double f_lo = 100.0;
    double f_hi = 600.0;
    /// Gaussian-toy clean samples are i.i.d. N(m0, var0).
    double m0 = 0.0;
    double var0 = 1e-2;

    [[nodiscard]] std::size_t length() const {
        return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    }

    void validate() const {
        if (!(duration_s > 0.0) || sample_rate <= 0 || length() == 0) {
            throw ConfigError("MixSpec: duration_s and sample_rate must be positive");
        }
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
            throw ConfigError("MixSpec: snr_db must be a number or +inf");
        }
        if (partials < 1 || !(f_lo > 0.0) || !(f_hi >= f_lo) || !(f_hi < 0.5 * sample_rate)) {
            throw ConfigError("MixSpec: invalid sinusoid settings");
        }
        if (!(level > 0.0) || !(var0 > 0.0)) throw ConfigError("MixSpec: level and var0 must be positive");
    }

    [[nodiscard]] KeyValueConfig to_config() const {
        KeyValueConfig c;
        c.set("clean", std::string(to_string(clean)));
        c.set("noise", std::string(to_string(noise)));
        c.set("snr_db", snr_db);
        c.set("duration_s", duration_s);
        c.set("seed", static_cast<long long>(seed));
        c.set("sample_rate", sample_rate);
        c.set("level", level);
        c.set("partials", partials);
        c.set("f_lo", f_lo);
        c.set("f_hi", f_hi);
        c.set("m0", m0);
        c.set("var0", var0);
        return c;
    }

    static MixSpec from_config(const KeyValueConfig& c) {
        MixSpec m;
        m.clean = parse_clean_kind(c.get_string("clean", to_string(m.clean)));
        m.noise = parse_noise_kind(c.get_string("noise", to_string(m.noise)));
        m.snr_db = c.get_double("snr_db", m.snr_db);
        m.duration_s = c.get_double("duration_s", m.duration_s);
        m.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<long long>(m.seed)));
        m.sample_rate = static_cast<int>(c.get_int("sample_rate", m.sample_rate));
        m.level = c.get_double("level", m.level);
        m.partials = static_cast<int>(c.get_int("partials", m.partials));
        m.f_lo = c.get_double("f_lo", m.f_lo);
        m.f_hi = c.get_double("f_hi", m.f_hi);
        m.m0 = c.get_double("m0", m.m0);
        m.var0 = c.get_double("var0", m.var0);
        m.validate();
        return m;
    }
};

struct MixPair {
    Signal x0;
    Signal y;
};

namespace detail {

inline void scale_to_rms(std::vector<double>& x, double level) {
    const double rms = std::sqrt(energy(x) / static_cast<double>(x.size()));
    if (rms > 0.0) {
        for (auto& v : x) v *= level / rms;
    }
}

inline std::vector<double> sinusoid_sum(const MixSpec& m, RandomSource& rng) {
    const std::size_t n = m.length();
    std::vector<double> x(n, 0.0);
    for (int p = 0; p < m.partials; ++p) {
        const double f = rng.uniform(m.f_lo, m.f_hi);
        const double amp = rng.uniform(0.5, 1.0);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double w = 2.0 * std::numbers::pi * f / m.sample_rate;
        for (std::size_t i = 0; i < n; ++i) x[i] += amp * std::sin(w * static_cast<double>(i) + phase);
    }
    scale_to_rms(x, m.level);
    return x;
}

/// Resonant second-order autoregression with its pole angle in [f_lo, f_hi].
inline std::vector<double> ar_process(const MixSpec& m, RandomSource& rng) {
    const std::size_t n = m.length();
    const double f = rng.uniform(m.f_lo, m.f_hi);
    const double radius = 0.995;
    const double a1 = 2.0 * radius * std::cos(2.0 * std::numbers::pi * f / m.sample_rate);
    const double a2 = -radius * radius;
    const std::size_t warmup = 2000;
    std::vector<double> x(n);
    double x1 = 0.0, x2 = 0.0;
    for (std::size_t i = 0; i < warmup + n; ++i) {
        const double v = a1 * x1 + a2 * x2 + rng.normal();
        x2 = x1;
        x1 = v;
        if (i >= warmup) x[i - warmup] = v;
    }
    scale_to_rms(x, m.level);
    return x;
}

/// White noise shaped to a 1/f power spectrum (-3 dB per octave), DC removed.
inline std::vector<double> pink_noise(std::size_t n, RandomSource& rng) {
    const std::size_t m = next_power_of_two(n);
    std::vector<std::complex<double>> a(m);
    for (auto& v : a) v = rng.normal();
    fft(a);
    a[0] = 0.0;
    for (std::size_t k = 1; k < m; ++k) {
        const std::size_t bin = std::min(k, m - k);
        a[k] /= std::sqrt(static_cast<double>(bin));
    }
    fft(a, true);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a[i].real();
    return x;
}

}  // namespace detail

/// Clean signal plus noise scaled in closed form to hit snr_db exactly.
[[nodiscard]] inline MixPair synthesize_pair(const MixSpec& m) {
    m.validate();
    RandomSource root(m.seed, 0x5e7);
    auto clean_rng = root.fork(1);
    auto noise_rng = root.fork(2);
    const std::size_t n = m.length();

    std::vector<double> x0;
    switch (m.clean) {
        case CleanKind::SinusoidSum: x0 = detail::sinusoid_sum(m, clean_rng); break;
        case CleanKind::ArProcess: x0 = detail::ar_process(m, clean_rng); break;
        case CleanKind::GaussianToy:
            x0.resize(n);
            for (auto& v : x0) v = m.m0 + std::sqrt(m.var0) * clean_rng.normal();
            break;
    }

    std::vector<double> y = x0;
    if (std::isfinite(m.snr_db)) {
        std::vector<double> noise(n);
        if (m.noise == NoiseKind::White) {
            noise_rng.fill_normal(noise);
        } else {
            noise = detail::pink_noise(n, noise_rng);
        }
        const double en = energy(noise);
        const double ex = energy(x0);
        if (!(ex > 0.0) || !(en > 0.0)) throw DomainError("synthesize_pair: degenerate clean or noise signal");
        const double scale = std::sqrt(ex / (en * std::pow(10.0, m.snr_db / 10.0)));
        for (std::size_t i = 0; i < n; ++i) y[i] += scale * noise[i];
    }
    return {Signal(std::move(x0), m.sample_rate), Signal(std::move(y), m.sample_rate)};
}

}  // namespace gse::audio
