#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gse/error.hpp"
#include "gse/random.hpp"

namespace gse::nn {

/// Hands out consecutive slices of a flat parameter vector.
class ParamLayout {
public:
    std::size_t allocate(std::size_t n) noexcept {
        const std::size_t off = size_;
        size_ += n;
        return off;
    }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }

private:
    std::size_t size_ = 0;
};

/// Affine map y = W x + b. W is row-major [out x in], followed by b.
class Dense {
public:
    Dense() = default;
    Dense(std::size_t in, std::size_t out, ParamLayout& layout)
        : in_(in), out_(out), offset_(layout.allocate(in * out + out)) {}

    [[nodiscard]] std::size_t in() const noexcept { return in_; }
    [[nodiscard]] std::size_t out() const noexcept { return out_; }
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    [[nodiscard]] std::size_t param_count() const noexcept { return in_ * out_ + out_; }
    [[nodiscard]] std::int64_t macs() const noexcept { return static_cast<std::int64_t>(in_ * out_); }

    void forward(std::span<const double> params, std::span<const double> x, std::span<double> y) const noexcept {
        const double* w = params.data() + offset_;
        const double* b = w + in_ * out_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double* row = w + o * in_;
            double acc = b[o];
            for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }

    /// Accumulates parameter gradients into `grad` and, when `dx` is non-empty,
    /// input gradients into `dx`.
    void backward(std::span<const double> params, std::span<const double> x, std::span<const double> dy,
                  std::span<double> dx, std::span<double> grad) const noexcept {
        const double* w = params.data() + offset_;
        double* gw = grad.data() + offset_;
        double* gb = gw + in_ * out_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double d = dy[o];
            gb[o] += d;
            if (d == 0.0) continue;
            double* grow = gw + o * in_;
            for (std::size_t i = 0; i < in_; ++i) grow[i] += d * x[i];
        }
        if (!dx.empty()) {
            for (std::size_t o = 0; o < out_; ++o) {
                const double d = dy[o];
                if (d == 0.0) continue;
                const double* row = w + o * in_;
                for (std::size_t i = 0; i < in_; ++i) dx[i] += row[i] * d;
            }
        }
    }

    /// Uniform(-a, a) weights with a = scale / sqrt(in); zero bias.
    void init(std::span<double> params, RandomSource& rng, double scale = 1.0) const noexcept {
        const double a = scale / std::sqrt(static_cast<double>(in_));
        for (std::size_t k = 0; k < in_ * out_; ++k) params[offset_ + k] = rng.uniform(-a, a);
        for (std::size_t k = 0; k < out_; ++k) params[offset_ + in_ * out_ + k] = 0.0;
    }

    void zero(std::span<double> params) const noexcept {
        for (std::size_t k = 0; k < param_count(); ++k) params[offset_ + k] = 0.0;
    }

private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    std::size_t offset_ = 0;
};

inline void tanh_forward(std::span<double> v) noexcept {
    for (auto& a : v) a = std::tanh(a);
}

/// Given y = tanh(x) and dy, accumulates dx += dy (1 - y^2).
inline void tanh_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) noexcept {
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

[[nodiscard]] inline double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

/// Gated recurrent unit:
///   r = sig(Wr x + Ur h), z = sig(Wz x + Uz h), n = tanh(Wn x + r * (Un h)),
///   h' = (1 - z) * n + z * h.
class GruCell {
public:
    /// Intermediate values of one step, kept for backpropagation.
    struct Step {
        std::vector<double> x, h, r, z, n, un;
    };

    GruCell() = default;
    GruCell(std::size_t in, std::size_t hidden, ParamLayout& layout)
        : in_(in),
          hidden_(hidden),
          wr_(in, hidden, layout),
          wz_(in, hidden, layout),
          wn_(in, hidden, layout),
          ur_(hidden, hidden, layout),
          uz_(hidden, hidden, layout),
          un_(hidden, hidden, layout) {}

    [[nodiscard]] std::size_t in() const noexcept { return in_; }
    [[nodiscard]] std::size_t hidden() const noexcept { return hidden_; }
    [[nodiscard]] std::int64_t macs() const noexcept {
        return wr_.macs() + wz_.macs() + wn_.macs() + ur_.macs() + uz_.macs() + un_.macs();
    }

    /// h is read, h_next written (they may not alias). When `step` is non-null it
    /// receives the cached intermediates.
    void forward(std::span<const double> params, std::span<const double> x, std::span<const double> h,
                 std::span<double> h_next, Step* step) const {
        const std::size_t m = hidden_;
        std::vector<double> r(m), z(m), n(m), un(m), tmp(m);
        wr_.forward(params, x, r);
        ur_.forward(params, h, tmp);
        for (std::size_t i = 0; i < m; ++i) r[i] = sigmoid(r[i] + tmp[i]);
        wz_.forward(params, x, z);
        uz_.forward(params, h, tmp);
        for (std::size_t i = 0; i < m; ++i) z[i] = sigmoid(z[i] + tmp[i]);
        wn_.forward(params, x, n);
        un_.forward(params, h, un);
        for (std::size_t i = 0; i < m; ++i) n[i] = std::tanh(n[i] + r[i] * un[i]);
        for (std::size_t i = 0; i < m; ++i) h_next[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
        if (step != nullptr) {
            step->x.assign(x.begin(), x.end());
            step->h.assign(h.begin(), h.end());
            step->r = std::move(r);
            step->z = std::move(z);
            step->n = std::move(n);
            step->un = std::move(un);
        }
    }

    /// Backpropagates dh_next through one step. Accumulates into dx (if non-empty)
    /// and grad; overwrites dh with the gradient w.r.t. the incoming state.
    void backward(std::span<const double> params, const Step& s, std::span<const double> dh_next,
                  std::span<double> dx, std::span<double> dh, std::span<double> grad) const {
        const std::size_t m = hidden_;
        std::vector<double> da_n(m), da_z(m), da_r(m), dun(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double dn = dh_next[i] * (1.0 - s.z[i]);
            const double dz = dh_next[i] * (s.h[i] - s.n[i]);
            dh[i] = dh_next[i] * s.z[i];
            da_n[i] = dn * (1.0 - s.n[i] * s.n[i]);
            dun[i] = da_n[i] * s.r[i];
            const double dr = da_n[i] * s.un[i];
            da_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
            da_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
        }
        wr_.backward(params, s.x, da_r, dx, grad);
        wz_.backward(params, s.x, da_z, dx, grad);
        wn_.backward(params, s.x, da_n, dx, grad);
        ur_.backward(params, s.h, da_r, dh, grad);
        uz_.backward(params, s.h, da_z, dh, grad);
        un_.backward(params, s.h, dun, dh, grad);
    }

    void init(std::span<double> params, RandomSource& rng) const noexcept {
        for (const Dense* d : {&wr_, &wz_, &wn_, &ur_, &uz_, &un_}) d->init(params, rng);
    }

private:
    std::size_t in_ = 0;
    std::size_t hidden_ = 0;
    Dense wr_, wz_, wn_, ur_, uz_, un_;
};

}  // namespace gse::nn
