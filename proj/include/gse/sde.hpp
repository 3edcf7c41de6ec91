#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gse/config.hpp"
#include "gse/error.hpp"
#include "gse/random.hpp"
#include "gse/signal.hpp"

namespace gse {

/// Schedule of the mean-reverting forward diffusion toward the noisy signal.
struct SdeParams {
    double gamma = 1.5;       ///< stiffness, 1/time
    double sigma_min = 1e-4;
    double sigma_max = 1e-1;
    double T = 1.0;           ///< diffusion horizon
    int N = 30;               ///< discrete reverse steps
    double t_eps = 0.03;      ///< smallest time used for training and score evaluation

    void validate() const {
        if (!(gamma > 0.0)) throw ConfigError("SdeParams: gamma must be positive");
        if (!(sigma_min > 0.0)) throw ConfigError("SdeParams: sigma_min must be positive");
        if (!(sigma_max >= sigma_min)) throw ConfigError("SdeParams: sigma_max must not be below sigma_min");
        if (!(T > t_eps && t_eps > 0.0)) throw ConfigError("SdeParams: require T > t_eps > 0");
        if (N < 1) throw ConfigError("SdeParams: N must be >= 1");
    }

    [[nodiscard]] double dt() const noexcept { return T / static_cast<double>(N); }

    /// Grid time of reverse step n (1-based): n * T / N.
    [[nodiscard]] double grid_time(int n) const noexcept { return dt() * static_cast<double>(n); }

    [[nodiscard]] KeyValueConfig to_config() const {
        KeyValueConfig c;
        c.set("gamma", gamma);
        c.set("sigma_min", sigma_min);
        c.set("sigma_max", sigma_max);
        c.set("T", T);
        c.set("N", N);
        c.set("t_eps", t_eps);
        return c;
    }

    static SdeParams from_config(const KeyValueConfig& c) {
        SdeParams p;
        p.gamma = c.get_double("gamma", p.gamma);
        p.sigma_min = c.get_double("sigma_min", p.sigma_min);
        p.sigma_max = c.get_double("sigma_max", p.sigma_max);
        p.T = c.get_double("T", p.T);
        p.N = static_cast<int>(c.get_int("N", p.N));
        p.t_eps = c.get_double("t_eps", p.t_eps);
        p.validate();
        return p;
    }

    friend bool operator==(const SdeParams&, const SdeParams&) = default;
};

namespace detail {

inline void require_time(double t, const SdeParams& p, const char* what) {
    if (!(t >= 0.0 && t <= p.T)) {
        throw DomainError(std::string(what) + ": t=" + std::to_string(t) + " outside [0, T]");
    }
}

}  // namespace detail

/// f(x, y) = gamma (y - x), elementwise.
[[nodiscard]] inline std::vector<double> drift(std::span<const double> x, std::span<const double> y,
                                               const SdeParams& p) {
    detail::require_same_length(x.size(), y.size(), "drift");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = p.gamma * (y[i] - x[i]);
    return out;
}

/// g(t) = sigma_min (sigma_max/sigma_min)^t sqrt(2 ln(sigma_max/sigma_min)).
/// This is the coefficient whose variance equation is solved exactly by variance().
[[nodiscard]] inline double diffusion_coeff(double t, const SdeParams& p) {
    detail::require_time(t, p, "diffusion_coeff");
    const double ratio = p.sigma_max / p.sigma_min;
    return p.sigma_min * std::pow(ratio, t) * std::sqrt(2.0 * std::log(ratio));
}

/// e^{-gamma t}, the weight of the clean signal in the kernel mean.
[[nodiscard]] inline double clean_weight(double t, const SdeParams& p) noexcept { return std::exp(-p.gamma * t); }

inline void mean_into(std::span<const double> x0, std::span<const double> y, double t, const SdeParams& p,
                      std::span<double> out) {
    detail::require_same_length(x0.size(), y.size(), "mean");
    detail::require_same_length(x0.size(), out.size(), "mean");
    const double a = clean_weight(t, p);
    const double b = 1.0 - a;
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * y[i];
}

/// Perturbation-kernel mean e^{-gamma t} x0 + (1 - e^{-gamma t}) y.
[[nodiscard]] inline std::vector<double> mean(std::span<const double> x0, std::span<const double> y, double t,
                                              const SdeParams& p) {
    detail::require_time(t, p, "mean");
    std::vector<double> out(x0.size());
    mean_into(x0, y, t, p, out);
    return out;
}

/// Perturbation-kernel variance sigma(t)^2.
[[nodiscard]] inline double variance(double t, const SdeParams& p) {
    detail::require_time(t, p, "variance");
    const double ratio = p.sigma_max / p.sigma_min;
    const double lr = std::log(ratio);
    const double v = p.sigma_min * p.sigma_min * (std::pow(ratio, 2.0 * t) - std::exp(-2.0 * p.gamma * t)) * lr /
                     (p.gamma + lr);
    return v > 0.0 ? v : 0.0;
}

[[nodiscard]] inline double sigma(double t, const SdeParams& p) { return std::sqrt(variance(t, p)); }

struct PerturbedSample {
    std::vector<double> x_t;
    /// Standardized noise actually contained in x_t: (x_t - mean) / sigma(t).
    std::vector<double> z;
};

/// Draws x_t = mean(x0, y, t) + sigma(t) z. The returned z is recomputed from the
/// rounded x_t so that the pair satisfies the kernel relation to working precision.
[[nodiscard]] inline PerturbedSample sample_perturbed(std::span<const double> x0, std::span<const double> y, double t,
                                                      const SdeParams& p, RandomSource& rng) {
    detail::require_same_length(x0.size(), y.size(), "sample_perturbed");
    if (t < p.t_eps || t > p.T) {
        throw DomainError("sample_perturbed: t=" + std::to_string(t) + " outside [t_eps, T]");
    }
    const double s = sigma(t, p);
    PerturbedSample out{mean(x0, y, t, p), std::vector<double>(x0.size())};
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double m = out.x_t[i];
        out.x_t[i] = m + s * rng.normal();
        out.z[i] = (out.x_t[i] - m) / s;
    }
    return out;
}

/// Euler-Maruyama simulation of the forward SDE on a uniform grid of `steps`
/// steps over [0, T]. Each element is an independent path. Returns the states at
/// times k * T / steps for every k that is a positive multiple of `record_every`.
[[nodiscard]] inline std::vector<std::vector<double>> euler_maruyama_snapshots(std::span<const double> x0,
                                                                             std::span<const double> y,
                                                                             const SdeParams& p, int steps,
                                                                             int record_every, RandomSource& rng) {
    detail::require_same_length(x0.size(), y.size(), "euler_maruyama_forward");
    if (steps < 1 || record_every < 1) throw DomainError("euler_maruyama_forward: steps must be positive");
    const double h = p.T / steps;
    const double sqrt_h = std::sqrt(h);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<std::vector<double>> snapshots;
    for (int k = 0; k < steps; ++k) {
        const double g = diffusion_coeff(h * k, p);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += p.gamma * (y[i] - x[i]) * h + g * sqrt_h * rng.normal();
        }
        if ((k + 1) % record_every == 0) snapshots.push_back(x);
    }
    return snapshots;
}

/// Forward SDE simulation returning x_T.
[[nodiscard]] inline std::vector<double> euler_maruyama_forward(std::span<const double> x0,
                                                                std::span<const double> y, const SdeParams& p,
                                                                int steps, RandomSource& rng) {
    if (steps < 100) throw DomainError("euler_maruyama_forward: at least 100 steps required");
    return euler_maruyama_snapshots(x0, y, p, steps, steps, rng).back();
}

}  // namespace gse
