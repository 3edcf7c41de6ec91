#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gse/error.hpp"

namespace gse::nn {

enum class OptimizerKind { SgdMomentum, Adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd" || s == "sgd-momentum") return OptimizerKind::SgdMomentum;
    throw ConfigError("unknown optimizer: " + s);
}

inline const char* to_string(OptimizerKind k) noexcept { return k == OptimizerKind::Adam ? "adam" : "sgd-momentum"; }

/// First-order optimizer state for one parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, std::size_t n, double learning_rate, double momentum = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8)
        : kind_(kind), lr_(learning_rate), beta1_(momentum), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {
        if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
    }

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        if (kind_ == OptimizerKind::SgdMomentum) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i] = beta1_ * m_[i] + grad[i];
                params[i] -= lr_ * m_[i];
            }
            return;
        }
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

    void set_learning_rate(double lr) noexcept { lr_ = lr; }
    [[nodiscard]] double learning_rate() const noexcept { return lr_; }

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    long long t_ = 0;
};

}  // namespace gse::nn
