#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rarefx/error.hpp"
#include "rarefx/panel.hpp"

namespace rarefx::forecast {

struct RollingWindowConfig {
    std::size_t lookback = 90;  // M
    std::size_t horizon = 30;   // H
    std::size_t stride = 1;     // s

    void validate() const {
        detail::require(lookback >= 1, "rolling window: lookback must be >= 1");
        detail::require(horizon >= 1, "rolling window: horizon must be >= 1");
        detail::require(stride >= 1, "rolling window: stride must be >= 1");
    }

    /// Number of windows over a series of `length` points: floor((len-M-H)/s)+1.
    std::size_t window_count(std::size_t length) const {
        validate();
        detail::require(length >= lookback + horizon,
                        "rolling window: series of length " + std::to_string(length) +
                            " shorter than lookback + horizon = " +
                            std::to_string(lookback + horizon));
        return (length - lookback - horizon) / stride + 1;
    }

    std::size_t input_start(std::size_t i) const noexcept { return i * stride; }
    std::size_t label_start(std::size_t i) const noexcept { return i * stride + lookback; }
};

struct TrainingSample {
    std::vector<double> input;      // M values, indices [label_start-M, label_start)
    std::vector<double> label;      // H values, indices [label_start, label_start+H)
    std::size_t label_start = 0;
    std::vector<bool> rare_mask;    // label step falls in some event window
    std::size_t series = 0;         // row of the panel the sample was cut from
};

/// Cuts a series into (lookback, horizon) training pairs with stride s and
/// marks label steps that fall inside an event of the calendar.
inline std::vector<TrainingSample> build_rolling_windows(std::span<const double> series,
                                                         const RollingWindowConfig& cfg,
                                                         const EventCalendar& calendar,
                                                         std::size_t series_id = 0) {
    const std::size_t count = cfg.window_count(series.size());
    std::vector<TrainingSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        TrainingSample s;
        s.series = series_id;
        s.label_start = cfg.label_start(i);
        const auto in = series.subspan(cfg.input_start(i), cfg.lookback);
        const auto lab = series.subspan(s.label_start, cfg.horizon);
        s.input.assign(in.begin(), in.end());
        s.label.assign(lab.begin(), lab.end());
        s.rare_mask.resize(cfg.horizon);
        for (std::size_t k = 0; k < cfg.horizon; ++k)
            s.rare_mask[k] = calendar.contains(s.label_start + k);
        out.push_back(std::move(s));
    }
    return out;
}

/// Windows for every row of a panel, series ids = row numbers.
inline std::vector<TrainingSample> build_panel_windows(const PanelSeries& panel,
                                                       const RollingWindowConfig& cfg,
                                                       const EventCalendar& calendar) {
    std::vector<TrainingSample> all;
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        auto s = build_rolling_windows(panel.series(i), cfg, calendar, i);
        all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return all;
}

}  // namespace rarefx::forecast
