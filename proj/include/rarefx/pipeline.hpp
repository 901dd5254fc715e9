#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rarefx/ar_inference.hpp"
#include "rarefx/baselines.hpp"
#include "rarefx/dates.hpp"
#include "rarefx/forecaster.hpp"
#include "rarefx/impact.hpp"
#include "rarefx/panel.hpp"

namespace rarefx::pipeline {

/// Settings shared by the adaptive-loss method and the two baselines.
struct PipelineConfig {
    forecast::RollingWindowConfig windows{90, 30, 1};
    forecast::Architecture arch;
    forecast::AdaptiveLossConfig loss;
    forecast::TrainConfig train;
    forecast::OverlapAggregation aggregation = forecast::OverlapAggregation::mean;
    std::vector<std::size_t> sd_periods{7, 365};
    impact::ScaleMode scale_mode = impact::ScaleMode::pre_event_month;
    impact::RatioAveraging averaging = impact::RatioAveraging::mean;

    baselines::DirectForecastConfig direct() const { return {windows, arch, train}; }
};

struct InsampleFit {
    forecast::TrainedForecaster model;
    std::vector<forecast::SyntheticControlSeries> controls;  // one per series
};

/// Trains one forecaster on the rolling windows of every series under the
/// adaptive loss, then re-forecasts each series in sample.
inline InsampleFit fit_insample(const PanelSeries& panel, const EventCalendar& calendar,
                                const PipelineConfig& cfg) {
    const auto samples = forecast::build_panel_windows(panel, cfg.windows, calendar);
    InsampleFit fit{forecast::train(samples, cfg.arch, cfg.loss, cfg.train), {}};
    for (std::size_t i = 0; i < panel.n_series(); ++i)
        fit.controls.push_back(
            forecast::insample_forecast(fit.model, panel.series(i), cfg.windows, i, cfg.aggregation));
    return fit;
}

/// Label used to key an occurrence in a ratio model: calendar year of the
/// first event day, or the occurrence ordinal for integer-indexed panels.
inline int occurrence_year(const PanelSeries& panel, const EventWindow& w, std::size_t ordinal) {
    return panel.time_kind() == TimeKind::date ? dates::year_of(panel.time_index()[w.first()])
                                               : static_cast<int>(ordinal);
}

/// Per-series effects of one method for every occurrence: effects[o][i] is
/// the d-vector Y - control for series i in occurrence o.
struct MethodEffects {
    std::vector<std::vector<std::vector<double>>> effects;
    /// Controls (synthetic Ŷ(0)) on each occurrence window, same layout.
    std::vector<std::vector<std::vector<double>>> controls;

    /// Cross-series mean effect of occurrence o.
    std::vector<double> panel_effect(std::size_t o) const {
        std::vector<double> m(effects[o][0].size(), 0.0);
        for (const auto& e : effects[o])
            for (std::size_t k = 0; k < m.size(); ++k) m[k] += e[k];
        for (auto& v : m) v /= static_cast<double>(effects[o].size());
        return m;
    }
};

struct EvaluationRow {
    std::string series_id;
    std::string event;
    double mape_sd = 0.0;
    double mape_df = 0.0;
    double mape_ours = 0.0;
};

struct EventEvaluation {
    std::string event;
    std::vector<EventWindow> occurrences;
    MethodEffects ours, df, sd;
    std::vector<EvaluationRow> rows;  // one per series, test = last occurrence
};

namespace internal {

inline MethodEffects effects_from_controls(
    const PanelSeries& panel, const std::vector<EventWindow>& occ,
    const std::function<std::vector<forecast::SyntheticControlSeries>(const EventWindow&)>& controls_for) {
    MethodEffects m;
    for (const auto& w : occ) {
        const auto ctl = controls_for(w);
        std::vector<std::vector<double>> eff, cv;
        for (std::size_t i = 0; i < panel.n_series(); ++i) {
            const auto est = forecast::extract_effect(ctl[i], panel.series(i), w);
            eff.push_back(est.delta_hat);
            std::vector<double> c;
            for (std::size_t t = w.first(); t <= w.last(); ++t) c.push_back(ctl[i].values[t]);
            cv.push_back(std::move(c));
        }
        m.effects.push_back(std::move(eff));
        m.controls.push_back(std::move(cv));
    }
    return m;
}

}  // namespace internal

/// Holiday-forecast comparison for one event. Every occurrence but the last
/// trains a per-series impact-ratio model; the last occurrence is the test
/// year. Predicted totals on the test window are
///   ours: in-sample control + r_bar * C_test
///   DF:   direct forecast   + r_bar(DF effects) * C_test
///   SD:   trend + all seasonals (annual seasonal included)
/// and each is scored by MAPE against the observed test window.
inline EventEvaluation evaluate_event(const PanelSeries& panel, const EventCalendar& calendar,
                                      const std::string& event, const PipelineConfig& cfg,
                                      const InsampleFit& fit) {
    const auto& occ = calendar.event(event).occurrences;
    detail::require(occ.size() >= 2, "evaluate: event '" + event +
                                         "' needs at least two occurrences (training + test)");
    EventEvaluation ev;
    ev.event = event;
    ev.occurrences = occ;

    ev.ours = internal::effects_from_controls(panel, occ, [&](const EventWindow&) { return fit.controls; });
    ev.df = internal::effects_from_controls(panel, occ, [&](const EventWindow& w) {
        return baselines::direct_forecast_panel(panel, w, cfg.direct());
    });
    ev.sd = internal::effects_from_controls(panel, occ, [&](const EventWindow& w) {
        std::vector<forecast::SyntheticControlSeries> c;
        for (std::size_t i = 0; i < panel.n_series(); ++i)
            c.push_back(baselines::seasonal_decompose(panel.series(i), cfg.sd_periods, w).control);
        return c;
    });

    const std::size_t test = occ.size() - 1;
    const auto& tw = occ[test];
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        const auto y = panel.series(i);
        auto scale = [&](const EventWindow& w) {
            return impact::year_scale(y, panel.time_index(), panel.time_kind(), w, calendar, cfg.scale_mode);
        };
        auto predicted_total = [&](const MethodEffects& m) {
            impact::ImpactRatioModel model(event);
            for (std::size_t o = 0; o < test; ++o) {
                const double c = scale(occ[o]);
                std::vector<double> r(m.effects[o][i]);
                for (auto& v : r) v /= c;
                model.add_year(occurrence_year(panel, occ[o], o), std::move(r), c);
            }
            const auto eff = impact::predict_effect(model, scale(tw), cfg.averaging);
            std::vector<double> total(tw.d);
            for (std::size_t k = 0; k < tw.d; ++k) total[k] = m.controls[test][i][k] + eff[k];
            return total;
        };
        const std::vector<double> observed(y.begin() + static_cast<std::ptrdiff_t>(tw.first()),
                                           y.begin() + static_cast<std::ptrdiff_t>(tw.last() + 1));
        const auto sd_total = baselines::seasonal_decompose(y, cfg.sd_periods, tw).total;
        std::vector<double> sd_pred;
        for (std::size_t t = tw.first(); t <= tw.last(); ++t) sd_pred.push_back(sd_total.values[t]);

        EvaluationRow row;
        row.series_id = panel.series_ids()[i];
        row.event = event;
        row.mape_sd = impact::evaluate_mape(sd_pred, observed);
        row.mape_df = impact::evaluate_mape(predicted_total(ev.df), observed);
        row.mape_ours = impact::evaluate_mape(predicted_total(ev.ours), observed);
        ev.rows.push_back(row);
    }
    return ev;
}

}  // namespace rarefx::pipeline
