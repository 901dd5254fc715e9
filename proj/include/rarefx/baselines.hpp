#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rarefx/ar_inference.hpp"
#include "rarefx/error.hpp"
#include "rarefx/forecaster.hpp"
#include "rarefx/panel.hpp"

namespace rarefx::baselines {

using forecast::SyntheticControlSeries;

/// Maps the observations 0..t0 to forecasts of t0+1..t0+d.
using HistoryPredictor =
    std::function<std::vector<double>(std::span<const double> history, std::size_t d)>;

/// Out-of-sample forecast of the event window. Only series[0..t0] is handed
/// to the predictor.
inline SyntheticControlSeries direct_forecast_with(std::span<const double> series,
                                                   const EventWindow& window,
                                                   const HistoryPredictor& predictor) {
    window.check_fits(series.size() - 1);
    const auto pred = predictor(series.first(window.t0 + 1), window.d);
    detail::require(pred.size() >= window.d, "direct_forecast: predictor returned too few values");
    SyntheticControlSeries s;
    s.values.assign(series.size(), 0.0);
    s.overlap_counts.assign(series.size(), 0);
    for (std::size_t k = 0; k < window.d; ++k) {
        s.values[window.first() + k] = pred[k];
        s.overlap_counts[window.first() + k] = 1;
    }
    return s;
}

/// AR(1) fitted on the history, iterated from its last value.
inline HistoryPredictor ar1_predictor() {
    return [](std::span<const double> history, std::size_t d) {
        Matrix m(1, history.size());
        std::copy(history.begin(), history.end(), m.row(0).begin());
        const auto panel = PanelSeries::with_integer_index(std::move(m));
        const auto fit = fit_ar1_ols(panel, history.size() - 1);
        std::vector<double> out(d);
        double y = history.back();
        for (auto& v : out) v = (y *= fit.phi_hat);
        return out;
    };
}

struct DirectForecastConfig {
    forecast::RollingWindowConfig windows;
    forecast::Architecture arch;
    forecast::TrainConfig train;
};

namespace internal {
inline void check_direct(const EventWindow& window, const forecast::RollingWindowConfig& rw) {
    rw.validate();
    detail::require(window.d <= rw.horizon, "direct_forecast: window size d=" + std::to_string(window.d) +
                                                " exceeds forecast horizon H=" +
                                                std::to_string(rw.horizon));
    detail::require(window.t0 >= rw.lookback + rw.horizon,
                    "direct_forecast: t0 must be >= lookback + horizon");
}

/// Unweighted training (w1 = w2 = 1): no event beyond t0 is visible.
inline forecast::AdaptiveLossConfig plain_loss() {
    forecast::AdaptiveLossConfig c;
    c.w1 = 1.0;
    c.w2 = 1.0;
    return c;
}
}  // namespace internal

/// Trains the feedforward forecaster on series[0..t0] and forecasts the window.
inline SyntheticControlSeries direct_forecast(std::span<const double> series, const EventWindow& window,
                                              const DirectForecastConfig& cfg) {
    internal::check_direct(window, cfg.windows);
    return direct_forecast_with(series, window, [&](std::span<const double> history, std::size_t d) {
        const auto samples = forecast::build_rolling_windows(history, cfg.windows, EventCalendar{});
        const auto model = forecast::train(samples, cfg.arch, internal::plain_loss(), cfg.train);
        auto out = model.forecast(0, history.last(cfg.windows.lookback));
        out.resize(d);
        return out;
    });
}

/// One forecaster trained on every series truncated at t0, then a direct
/// forecast per series.
inline std::vector<SyntheticControlSeries> direct_forecast_panel(const PanelSeries& panel,
                                                                 const EventWindow& window,
                                                                 const DirectForecastConfig& cfg) {
    internal::check_direct(window, cfg.windows);
    window.check_fits(panel);
    std::vector<forecast::TrainingSample> samples;
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        auto s = forecast::build_rolling_windows(panel.series(i).first(window.t0 + 1), cfg.windows,
                                                 EventCalendar{}, i);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    const auto model = forecast::train(samples, cfg.arch, internal::plain_loss(), cfg.train);
    std::vector<SyntheticControlSeries> out;
    for (std::size_t i = 0; i < panel.n_series(); ++i)
        out.push_back(direct_forecast_with(panel.series(i), window,
                                           [&](std::span<const double> history, std::size_t d) {
                                               auto f = model.forecast(
                                                   i, history.last(cfg.windows.lookback));
                                               f.resize(d);
                                               return f;
                                           }));
    return out;
}

struct DecompositionResult {
    std::vector<double> trend;
    std::map<std::size_t, std::vector<double>> seasonal_components;
    std::vector<double> remainder;
};

/// Centered moving average over `period` points (2 x period for even periods);
/// the window shrinks symmetrically to a plain mean near the edges.
inline std::vector<double> centered_moving_average(std::span<const double> x, std::size_t period) {
    const std::size_t n = x.size();
    const std::size_t half = period / 2;
    const bool even = period % 2 == 0;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + x[t];
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t h = std::min({half, t, n - 1 - t});
        if (h == half && even) {
            const double inner = prefix[t + half] - prefix[t - half + 1];
            out[t] = (inner + 0.5 * (x[t - half] + x[t + half])) / static_cast<double>(period);
        } else {
            out[t] = (prefix[t + h + 1] - prefix[t - h]) / static_cast<double>(2 * h + 1);
        }
    }
    return out;
}

/// Period-phase means of x, centered to sum to zero over one period. The first
/// and last `margin` points are left out of the averages.
inline std::vector<double> phase_means(std::span<const double> x, std::size_t period,
                                       std::size_t margin = 0) {
    detail::require(x.size() >= 2 * margin + period, "phase_means: fewer than one period left after margin");
    std::vector<double> sum(period, 0.0);
    std::vector<std::size_t> cnt(period, 0);
    for (std::size_t t = margin; t + margin < x.size(); ++t) {
        sum[t % period] += x[t];
        ++cnt[t % period];
    }
    double total = 0.0;
    for (std::size_t p = 0; p < period; ++p) {
        sum[p] /= static_cast<double>(cnt[p]);
        total += sum[p];
    }
    const double centre = total / static_cast<double>(period);
    for (auto& v : sum) v -= centre;
    return sum;
}

struct SeasonalBaseline {
    DecompositionResult decomposition;
    /// trend + every seasonal except the longest period, on the event window.
    SyntheticControlSeries control;
    /// trend + all seasonals on the event window.
    SyntheticControlSeries total;
};

/// Iterated additive decomposition over the given periods (ascending): for each
/// period, trend = centered moving average of what remains, seasonal = phase
/// means of the detrended remainder away from the truncated edges. The final trend is re-estimated on the
/// fully deseasonalized series with the longest period.
inline SeasonalBaseline seasonal_decompose(std::span<const double> series,
                                           std::vector<std::size_t> periods,
                                           const EventWindow& window) {
    detail::require(!periods.empty(), "seasonal_decompose: at least one period required");
    std::sort(periods.begin(), periods.end());
    for (std::size_t j = 0; j < periods.size(); ++j) {
        detail::require(periods[j] >= 2, "seasonal_decompose: periods must be >= 2");
        detail::require(j == 0 || periods[j] != periods[j - 1], "seasonal_decompose: periods must be distinct");
    }
    detail::require(series.size() >= 2 * periods.back(),
                    "seasonal_decompose: series of length " + std::to_string(series.size()) +
                        " shorter than twice the longest period " + std::to_string(periods.back()));
    window.check_fits(series.size() - 1);

    const std::size_t n = series.size();
    std::vector<double> remaining(series.begin(), series.end());
    DecompositionResult dec;
    for (std::size_t p : periods) {
        const auto trend = centered_moving_average(remaining, p);
        std::vector<double> detrended(n);
        for (std::size_t t = 0; t < n; ++t) detrended[t] = remaining[t] - trend[t];
        const auto phase = phase_means(detrended, p, p / 2);
        std::vector<double> seasonal(n);
        for (std::size_t t = 0; t < n; ++t) {
            seasonal[t] = phase[t % p];
            remaining[t] -= seasonal[t];
        }
        dec.seasonal_components.emplace(p, std::move(seasonal));
    }
    dec.trend = centered_moving_average(remaining, periods.back());
    dec.remainder.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double fitted = dec.trend[t];
        for (const auto& [p, s] : dec.seasonal_components) fitted += s[t];
        dec.remainder[t] = series[t] - fitted;
    }

    SeasonalBaseline out;
    out.control.values.assign(n, 0.0);
    out.control.overlap_counts.assign(n, 0);
    out.total = out.control;
    for (std::size_t t = window.first(); t <= window.last(); ++t) {
        double sub = dec.trend[t];
        for (const auto& [p, s] : dec.seasonal_components)
            if (p != periods.back()) sub += s[t];
        out.control.values[t] = sub;
        out.total.values[t] = sub + dec.seasonal_components.at(periods.back())[t];
        out.control.overlap_counts[t] = out.total.overlap_counts[t] = 1;
    }
    out.decomposition = std::move(dec);
    return out;
}

}  // namespace rarefx::baselines
