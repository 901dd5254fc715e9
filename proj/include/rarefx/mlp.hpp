#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rarefx/error.hpp"
#include "rarefx/random.hpp"

namespace rarefx::forecast {

enum class Activation { relu, tanh };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

/// Fully connected network. Parameters are stored flat, layer by layer, as
/// the weight matrix (fan_out x fan_in, row-major) followed by the biases.
/// The activation is applied to every layer except the last.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<std::size_t> layer_sizes, Activation act)
        : sizes_(std::move(layer_sizes)), act_(act) {
        detail::require(sizes_.size() >= 2, "mlp: need at least input and output sizes");
        for (auto s : sizes_) detail::require(s >= 1, "mlp: layer sizes must be >= 1");
        params_.assign(parameter_count(sizes_), 0.0);
    }

    static std::size_t parameter_count(const std::vector<std::size_t>& sizes) {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += (sizes[l] + 1) * sizes[l + 1];
        return n;
    }

    /// Glorot-uniform weights from a seeded xoshiro stream, zero biases.
    void initialize(std::uint64_t seed) {
        Xoshiro256 rng(seed);
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            const double a = std::sqrt(6.0 / static_cast<double>(in + out));
            for (std::size_t j = 0; j < in * out; ++j) params_[off + j] = a * (2.0 * rng.uniform() - 1.0);
            for (std::size_t j = 0; j < out; ++j) params_[off + in * out + j] = 0.0;
            off += (in + 1) * out;
        }
    }

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    Activation activation() const noexcept { return act_; }
    std::size_t input_size() const noexcept { return sizes_.front(); }
    std::size_t output_size() const noexcept { return sizes_.back(); }
    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

    /// Per-layer pre-activations and activations of one forward pass.
    struct Trace {
        std::vector<std::vector<double>> pre;   // z_l, l = 1..L
        std::vector<std::vector<double>> post;  // a_l, l = 0..L (a_0 = input)
    };

    void forward(std::span<const double> input, Trace& tr) const {
        const std::size_t L = sizes_.size() - 1;
        tr.pre.resize(L);
        tr.post.resize(L + 1);
        tr.post[0].assign(input.begin(), input.end());
        std::size_t off = 0;
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            const double* W = params_.data() + off;
            const double* b = W + in * out;
            const double* a = tr.post[l].data();
            auto& z = tr.pre[l];
            auto& h = tr.post[l + 1];
            z.resize(out);
            h.resize(out);
            for (std::size_t o = 0; o < out; ++o) {
                const double* w = W + o * in;
                double s = b[o];
                for (std::size_t j = 0; j < in; ++j) s += w[j] * a[j];
                z[o] = s;
                h[o] = l + 1 == L ? s : activate(s);
            }
            off += (in + 1) * out;
        }
    }

    std::vector<double> predict(std::span<const double> input) const {
        Trace tr;
        forward(input, tr);
        return tr.post.back();
    }

    /// Accumulates scale * dLoss/dtheta into grad given dLoss/doutput.
    void backward(const Trace& tr, std::span<const double> d_output, double scale,
                  std::span<double> grad, std::vector<double>& delta,
                  std::vector<double>& delta_prev) const {
        const std::size_t L = sizes_.size() - 1;
        delta.assign(d_output.begin(), d_output.end());
        std::size_t off = params_.size();
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            off -= (in + 1) * out;
            if (l + 1 != L)
                for (std::size_t o = 0; o < out; ++o) delta[o] *= activate_grad(tr.pre[l][o]);
            const double* W = params_.data() + off;
            double* gW = grad.data() + off;
            double* gb = gW + in * out;
            const double* a = tr.post[l].data();
            for (std::size_t o = 0; o < out; ++o) {
                const double g = scale * delta[o];
                if (g == 0.0) continue;
                double* row = gW + o * in;
                for (std::size_t j = 0; j < in; ++j) row[j] += g * a[j];
                gb[o] += g;
            }
            if (l == 0) break;
            delta_prev.assign(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double dv = delta[o];
                if (dv == 0.0) continue;
                const double* w = W + o * in;
                for (std::size_t j = 0; j < in; ++j) delta_prev[j] += w[j] * dv;
            }
            delta.swap(delta_prev);
        }
    }

    double activate(double z) const noexcept { return act_ == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }
    double activate_grad(double z) const noexcept {
        if (act_ == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> sizes_;
    Activation act_ = Activation::relu;
    std::vector<double> params_;
};

}  // namespace rarefx::forecast
