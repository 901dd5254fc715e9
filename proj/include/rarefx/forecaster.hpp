#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "rarefx/adaptive_loss.hpp"
#include "rarefx/ar_inference.hpp"
#include "rarefx/error.hpp"
#include "rarefx/mlp.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/random.hpp"
#include "rarefx/rolling_window.hpp"
#include "rarefx/stats.hpp"

namespace rarefx::forecast {

/// Robust per-series scaling: z = (y - shift) / scale.
struct Normalization {
    double shift = 0.0;
    double scale = 1.0;

    double apply(double y) const noexcept { return (y - shift) / scale; }
    double invert(double z) const noexcept { return z * scale + shift; }
    friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Median / interquartile range of a set of values; scale falls back to 1 for
/// (near) constant data.
inline Normalization robust_normalization(std::vector<double> values) {
    detail::require(!values.empty(), "normalization: no values");
    const double med = stats::quantile(values, 0.5);
    const double iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
    const double tol = 1e-12 * std::max(1.0, std::abs(med));
    return {med, iqr > tol ? iqr : 1.0};
}

enum class Optimizer { sgd, adam };

struct Architecture {
    std::vector<std::size_t> hidden{32, 32};
    Activation activation = Activation::relu;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::adam;

    void validate() const {
        detail::require(epochs >= 1, "train: epochs must be >= 1");
        detail::require(batch_size >= 1, "train: batch_size must be >= 1");
        detail::require(learning_rate > 0.0 && std::isfinite(learning_rate),
                        "train: learning rate must be positive");
    }
};

class TrainedForecaster {
public:
    TrainedForecaster() = default;
    TrainedForecaster(Mlp net, std::vector<Normalization> norm)
        : net_(std::move(net)), norm_(std::move(norm)) {
        for (double p : net_.parameters())
            detail::require(std::isfinite(p), "forecaster: non-finite parameter");
    }

    const Mlp& network() const noexcept { return net_; }
    const std::vector<Normalization>& normalization() const noexcept { return norm_; }
    std::size_t lookback() const noexcept { return net_.input_size(); }
    std::size_t horizon() const noexcept { return net_.output_size(); }
    const std::vector<std::size_t>& layer_sizes() const noexcept { return net_.layer_sizes(); }
    Activation activation() const noexcept { return net_.activation(); }
    const std::vector<double>& parameters() const noexcept { return net_.parameters(); }

    const Normalization& normalization_for(std::size_t series) const {
        detail::require(series < norm_.size(), "forecaster: no normalization recorded for series " +
                                                   std::to_string(series));
        return norm_[series];
    }

    /// H-step forecast in series units from the last M raw observations.
    std::vector<double> forecast(std::size_t series, std::span<const double> lookback_values) const {
        detail::require(lookback_values.size() == lookback(), "forecast: lookback length mismatch");
        const auto& nz = normalization_for(series);
        std::vector<double> x(lookback_values.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = nz.apply(lookback_values[j]);
        auto y = net_.predict(x);
        for (auto& v : y) v = nz.invert(v);
        return y;
    }

    /// Mean training loss per epoch (not serialized).
    std::vector<double> epoch_loss;

    friend bool operator==(const TrainedForecaster& a, const TrainedForecaster& b) {
        return a.net_ == b.net_ && a.norm_ == b.norm_;
    }

private:
    Mlp net_;
    std::vector<Normalization> norm_;
};

namespace internal {

/// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
inline std::uint64_t bounded(Xoshiro256& rng, std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(rng()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t t = (0 - n) % n;
        while (low < t) {
            m = static_cast<__uint128_t>(rng()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

template <class T>
void shuffle(std::vector<T>& v, Xoshiro256& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

}  // namespace internal

/// Median/IQR of every value a series contributes to the samples (each time
/// index counted once).
inline std::vector<Normalization> series_normalization(const std::vector<TrainingSample>& samples) {
    std::size_t n_series = 0;
    for (const auto& s : samples) n_series = std::max(n_series, s.series + 1);
    std::vector<std::vector<double>> by_t(n_series);
    std::vector<std::vector<char>> seen(n_series);
    for (const auto& s : samples) {
        const std::size_t M = s.input.size();
        const std::size_t end = s.label_start + s.label.size();
        auto& vals = by_t[s.series];
        auto& mark = seen[s.series];
        if (vals.size() < end) {
            vals.resize(end);
            mark.resize(end, 0);
        }
        for (std::size_t j = 0; j < M; ++j) {
            vals[s.label_start - M + j] = s.input[j];
            mark[s.label_start - M + j] = 1;
        }
        for (std::size_t k = 0; k < s.label.size(); ++k) {
            vals[s.label_start + k] = s.label[k];
            mark[s.label_start + k] = 1;
        }
    }
    std::vector<Normalization> out(n_series);
    for (std::size_t i = 0; i < n_series; ++i) {
        std::vector<double> v;
        for (std::size_t t = 0; t < by_t[i].size(); ++t)
            if (seen[i][t]) v.push_back(by_t[i][t]);
        if (!v.empty()) out[i] = robust_normalization(std::move(v));
    }
    return out;
}

/// Mini-batch gradient descent on the batch-mean adaptive loss.
inline TrainedForecaster train(const std::vector<TrainingSample>& samples, const Architecture& arch,
                               const AdaptiveLossConfig& loss_cfg, const TrainConfig& cfg) {
    detail::require(!samples.empty(), "train: no training samples");
    loss_cfg.validate();
    cfg.validate();
    const std::size_t M = samples.front().input.size();
    const std::size_t H = samples.front().label.size();
    for (const auto& s : samples)
        detail::require(s.input.size() == M && s.label.size() == H && s.rare_mask.size() == H,
                                "train: samples have inconsistent shapes");

    const auto norm = series_normalization(samples);
    std::vector<std::vector<double>> x(samples.size()), y(samples.size());
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const auto& nz = norm[samples[n].series];
        x[n].resize(M);
        y[n].resize(H);
        for (std::size_t j = 0; j < M; ++j) x[n][j] = nz.apply(samples[n].input[j]);
        for (std::size_t k = 0; k < H; ++k) y[n][k] = nz.apply(samples[n].label[k]);
    }

    std::vector<std::size_t> sizes{M};
    sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
    sizes.push_back(H);
    Mlp net(sizes, arch.activation);
    net.initialize(mix_seed(cfg.seed, 1));
    Xoshiro256 shuffle_rng(mix_seed(cfg.seed, 2));

    auto& theta = net.parameters();
    const std::size_t P = theta.size();
    std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0);
    std::vector<double> w1(samples.size(), loss_cfg.w1);
    std::vector<double> rare_resid(samples.size(), 0.0);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    Mlp::Trace tr;
    std::vector<double> dout(H), delta, delta_prev;
    std::vector<double> losses(samples.size());
    std::vector<double> history;
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        internal::shuffle(order, shuffle_rng);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            const double inv_b = 1.0 / static_cast<double>(b1 - b0);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t bi = b0; bi < b1; ++bi) {
                const std::size_t n = order[bi];
                const auto& mask = samples[n].rare_mask;
                net.forward(x[n], tr);
                const auto& pred = tr.post.back();
                double loss = 0.0, rr = 0.0;
                std::size_t n_rare = 0;
                for (std::size_t k = 0; k < H; ++k) {
                    const double w = mask[k] ? w1[n] : loss_cfg.w2;
                    loss += w * distance(loss_cfg.distance, y[n][k], pred[k]);
                    dout[k] = w * distance_grad(loss_cfg.distance, y[n][k], pred[k]);
                    if (mask[k]) {
                        rr += std::abs(pred[k] - y[n][k]);
                        ++n_rare;
                    }
                }
                losses[n] = loss;
                rare_resid[n] = n_rare ? rr / static_cast<double>(n_rare) : 0.0;
                net.backward(tr, dout, inv_b, grad, delta, delta_prev);
            }
            ++step;
            if (cfg.optimizer == Optimizer::sgd) {
                for (std::size_t p = 0; p < P; ++p) theta[p] -= cfg.learning_rate * grad[p];
            } else {
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t p = 0; p < P; ++p) {
                    m1[p] = beta1 * m1[p] + (1.0 - beta1) * grad[p];
                    m2[p] = beta2 * m2[p] + (1.0 - beta2) * grad[p] * grad[p];
                    theta[p] -= cfg.learning_rate * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + adam_eps);
                }
            }
        }
        const double epoch_mean = stats::mean(losses);
        if (!std::isfinite(epoch_mean))
            throw NumericalError("training diverged at epoch " + std::to_string(epoch));
        history.push_back(epoch_mean);

        if (loss_cfg.adaptation == WeightAdaptation::residual_inverse) {
            double total = 0.0;
            std::size_t count = 0;
            for (std::size_t n = 0; n < samples.size(); ++n) {
                if (std::find(samples[n].rare_mask.begin(), samples[n].rare_mask.end(), true) ==
                    samples[n].rare_mask.end())
                    continue;
                w1[n] = 1.0 / (loss_cfg.floor + rare_resid[n]);
                total += w1[n];
                ++count;
            }
            if (count > 0 && total > 0.0) {
                const double rescale = loss_cfg.w1 * static_cast<double>(count) / total;
                for (std::size_t n = 0; n < samples.size(); ++n)
                    if (std::find(samples[n].rare_mask.begin(), samples[n].rare_mask.end(), true) !=
                        samples[n].rare_mask.end())
                        w1[n] *= rescale;
            }
        }
    }
    TrainedForecaster model(std::move(net), norm);
    model.epoch_loss = std::move(history);
    return model;
}

enum class OverlapAggregation { mean, median };

/// In-sample forecasts folded onto absolute time indices. values[t] is defined
/// exactly where overlap_counts[t] >= 1.
struct SyntheticControlSeries {
    std::vector<double> values;
    std::vector<std::size_t> overlap_counts;

    bool covers(std::size_t t) const noexcept { return t < overlap_counts.size() && overlap_counts[t] > 0; }

    double at(std::size_t t) const {
        if (!covers(t)) throw BoundsError("synthetic control: index " + std::to_string(t) + " not in support");
        return values[t];
    }

    std::vector<std::size_t> support() const {
        std::vector<std::size_t> s;
        for (std::size_t t = 0; t < overlap_counts.size(); ++t)
            if (overlap_counts[t] > 0) s.push_back(t);
        return s;
    }
};

/// Collects every prediction made for each time index and reduces them.
class OverlapAccumulator {
public:
    explicit OverlapAccumulator(std::size_t length) : preds_(length) {}

    void add(std::size_t t, double v) {
        detail::require_bounds(t < preds_.size(), "overlap accumulator: index out of range");
        preds_[t].push_back(v);
    }

    SyntheticControlSeries finish(OverlapAggregation agg = OverlapAggregation::mean) const {
        SyntheticControlSeries s;
        s.values.assign(preds_.size(), 0.0);
        s.overlap_counts.assign(preds_.size(), 0);
        for (std::size_t t = 0; t < preds_.size(); ++t) {
            if (preds_[t].empty()) continue;
            s.overlap_counts[t] = preds_[t].size();
            s.values[t] = agg == OverlapAggregation::mean ? stats::mean(preds_[t])
                                                          : stats::median(preds_[t]);
        }
        return s;
    }

private:
    std::vector<std::vector<double>> preds_;
};

/// Re-forecasts every rolling window of the series and averages the
/// overlapping horizon predictions per time index.
inline SyntheticControlSeries insample_forecast(const TrainedForecaster& model,
                                                std::span<const double> series,
                                                const RollingWindowConfig& cfg,
                                                std::size_t series_id = 0,
                                                OverlapAggregation agg = OverlapAggregation::mean) {
    detail::require(cfg.lookback == model.lookback() && cfg.horizon == model.horizon(),
                            "insample_forecast: window config (M=" + std::to_string(cfg.lookback) +
                                ", H=" + std::to_string(cfg.horizon) + ") does not match model (M=" +
                                std::to_string(model.lookback()) + ", H=" +
                                std::to_string(model.horizon()) + ")");
    const std::size_t count = cfg.window_count(series.size());
    OverlapAccumulator acc(series.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto pred = model.forecast(series_id, series.subspan(cfg.input_start(i), cfg.lookback));
        for (std::size_t k = 0; k < cfg.horizon; ++k) acc.add(cfg.label_start(i) + k, pred[k]);
    }
    return acc.finish(agg);
}

inline void require_support(const SyntheticControlSeries& synth, const EventWindow& window) {
    std::string missing;
    for (std::size_t t = window.first(); t <= window.last(); ++t)
        if (!synth.covers(t)) missing += (missing.empty() ? "" : ", ") + std::to_string(t);
    if (!missing.empty())
        throw BoundsError("extract_effect: event window not covered by synthetic control; missing indices " +
                          missing);
}

/// delta_hat[k] = Y[t0+1+k] - synthetic[t0+1+k] for one series.
inline TreatmentEffectEstimate extract_effect(const SyntheticControlSeries& synth,
                                              std::span<const double> series,
                                              const EventWindow& window) {
    window.check_fits(series.size() - 1);
    require_support(synth, window);
    TreatmentEffectEstimate est;
    est.window = window;
    est.n_series = 1;
    for (std::size_t t = window.first(); t <= window.last(); ++t)
        est.delta_hat.push_back(series[t] - synth.values[t]);
    return est;
}

/// Cross-series mean of the per-series effects.
inline TreatmentEffectEstimate extract_panel_effect(const std::vector<SyntheticControlSeries>& synth,
                                                    const PanelSeries& panel,
                                                    const EventWindow& window) {
    detail::require(synth.size() == panel.n_series(),
                            "extract_panel_effect: one synthetic control per series required");
    TreatmentEffectEstimate est;
    est.window = window;
    est.n_series = panel.n_series();
    est.delta_hat.assign(window.d, 0.0);
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        const auto e = extract_effect(synth[i], panel.series(i), window);
        for (std::size_t k = 0; k < window.d; ++k) est.delta_hat[k] += e.delta_hat[k];
    }
    for (auto& v : est.delta_hat) v /= static_cast<double>(panel.n_series());
    return est;
}

/// Largest relative error between the analytic loss gradient and central
/// differences. The sample is taken in network units. Parameters whose
/// +/- epsilon perturbation flips a ReLU gate or the sign of a residual under
/// the absolute distance are skipped, since the loss is not differentiable
/// across those kinks.
inline double gradient_check(const Mlp& model, const TrainingSample& sample,
                             const AdaptiveLossConfig& loss_cfg, double epsilon) {
    detail::require(epsilon > 0.0, "gradient_check: epsilon must be > 0");
    loss_cfg.validate();
    const std::size_t H = model.output_size();
    Mlp net = model;

    auto signature = [&](const Mlp::Trace& tr) {
        std::vector<char> sig;
        if (net.activation() == Activation::relu)
            for (std::size_t l = 0; l + 1 < tr.pre.size(); ++l)
                for (double z : tr.pre[l]) sig.push_back(z > 0.0);
        if (loss_cfg.distance == Distance::absolute)
            for (std::size_t k = 0; k < H; ++k) sig.push_back(tr.post.back()[k] > sample.label[k]);
        return sig;
    };
    auto loss_at = [&](Mlp::Trace& tr) {
        net.forward(sample.input, tr);
        return adaptive_loss(tr.post.back(), sample.label, sample.rare_mask, loss_cfg).loss;
    };

    Mlp::Trace tr;
    net.forward(sample.input, tr);
    const auto base_sig = signature(tr);
    std::vector<double> dout(H), grad(net.parameters().size(), 0.0), delta, delta_prev;
    for (std::size_t k = 0; k < H; ++k) {
        const double w = sample.rare_mask[k] ? loss_cfg.w1 : loss_cfg.w2;
        dout[k] = w * distance_grad(loss_cfg.distance, sample.label[k], tr.post.back()[k]);
    }
    net.backward(tr, dout, 1.0, grad, delta, delta_prev);

    double worst = 0.0;
    auto& theta = net.parameters();
    for (std::size_t p = 0; p < theta.size(); ++p) {
        const double orig = theta[p];
        theta[p] = orig + epsilon;
        const double lp = loss_at(tr);
        const bool kink_plus = signature(tr) != base_sig;
        theta[p] = orig - epsilon;
        const double lm = loss_at(tr);
        const bool kink_minus = signature(tr) != base_sig;
        theta[p] = orig;
        if (kink_plus || kink_minus) continue;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double diff = std::abs(numeric - grad[p]);
        const double mag = std::max(std::abs(numeric), std::abs(grad[p]));
        worst = std::max(worst, mag < 1e-8 ? diff : diff / mag);
    }
    return worst;
}

// Text model format, version 1:
//   rarefx-forecaster 1
//   activation <relu|tanh>
//   layers <L> <n_0> ... <n_{L-1}>
//   normalization <S>        followed by S lines "<shift> <scale>"
//   parameters <P>           followed by P lines, one value each
// All reals are written as C99 hexadecimal floats so load(save(m)) == m.

namespace internal {
inline std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}
inline double parse_real(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0') throw DataError("model file: bad number '" + tok + "'");
    return v;
}
}  // namespace internal

inline void write_model(std::ostream& os, const TrainedForecaster& m) {
    os << "rarefx-forecaster 1\n";
    os << "activation " << to_string(m.activation()) << "\n";
    os << "layers " << m.layer_sizes().size();
    for (auto s : m.layer_sizes()) os << ' ' << s;
    os << "\nnormalization " << m.normalization().size() << "\n";
    for (const auto& n : m.normalization())
        os << internal::hexfloat(n.shift) << ' ' << internal::hexfloat(n.scale) << "\n";
    os << "parameters " << m.parameters().size() << "\n";
    for (double p : m.parameters()) os << internal::hexfloat(p) << "\n";
}

inline TrainedForecaster read_model(std::istream& is) {
    auto expect = [&](const std::string& key) {
        std::string tok;
        if (!(is >> tok) || tok != key) throw DataError("model file: expected '" + key + "'");
    };
    expect("rarefx-forecaster");
    int version = 0;
    if (!(is >> version) || version != 1) throw DataError("model file: unsupported version");
    expect("activation");
    std::string act;
    is >> act;
    if (act != "relu" && act != "tanh") throw DataError("model file: unknown activation '" + act + "'");
    expect("layers");
    std::size_t L = 0;
    if (!(is >> L) || L < 2 || L > 64) throw DataError("model file: bad layer count");
    std::vector<std::size_t> sizes(L);
    for (auto& s : sizes)
        if (!(is >> s)) throw DataError("model file: bad layer size");
    expect("normalization");
    std::size_t S = 0;
    is >> S;
    std::vector<Normalization> norm(S);
    for (auto& n : norm) {
        std::string a, b;
        if (!(is >> a >> b)) throw DataError("model file: truncated normalization block");
        n = {internal::parse_real(a), internal::parse_real(b)};
    }
    expect("parameters");
    std::size_t P = 0;
    is >> P;
    Mlp net(sizes, act == "relu" ? Activation::relu : Activation::tanh);
    if (P != net.parameters().size()) throw DataError("model file: parameter count does not match layers");
    for (auto& p : net.parameters()) {
        std::string tok;
        if (!(is >> tok)) throw DataError("model file: truncated parameter block");
        p = internal::parse_real(tok);
    }
    return TrainedForecaster(std::move(net), std::move(norm));
}

inline void save_model(const std::string& path, const TrainedForecaster& m) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write model file '" + path + "'");
    write_model(os, m);
    if (!os) throw IoError("failed writing model file '" + path + "'");
}

inline TrainedForecaster load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open model file '" + path + "'");
    return read_model(is);
}

}  // namespace rarefx::forecast
