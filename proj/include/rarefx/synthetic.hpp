#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rarefx/dates.hpp"
#include "rarefx/error.hpp"
#include "rarefx/matrix.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/random.hpp"

namespace rarefx::synthetic {

/// Daily retail-like panel: exponential trend x (1 + weekly pattern) plus
/// AR(1) noise, with an additive holiday effect on the same calendar dates
/// every year. The effect on day k of the holiday is ratio[k] times the
/// series' trend level on that day, so it grows with the yearly scale.
struct HolidayPanelSpec {
    std::size_t n_series = 6;
    std::string start_date = "2012-01-01";
    std::size_t years = 4;
    double base_level = 100.0;         // series i starts at base_level * (1 + 0.2 i)
    double annual_growth = 0.25;       // level multiplies by (1 + g) per year
    double weekly_amplitude = 0.15;    // relative to the trend level
    double ar_phi = 0.5;
    double ar_sigma_rel = 0.03;        // innovation sd relative to base level
    int holiday_month = 11;
    int holiday_day = 24;
    std::size_t holiday_days = 5;
    std::vector<double> effect_ratio{0.3, 0.6, 0.9, 0.5, 0.25};
    std::string event_name = "holiday";
    std::uint64_t seed = 0;
};

struct HolidayPanel {
    PanelSeries panel;
    EventCalendar calendar;
    /// true_effect[o](i, k): injected effect of occurrence o, series i, day k.
    std::vector<Matrix> true_effect;

    std::vector<double> panel_effect(std::size_t o) const {
        const auto& m = true_effect[o];
        std::vector<double> out(m.cols(), 0.0);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t k = 0; k < m.cols(); ++k) out[k] += m(i, k);
        for (auto& v : out) v /= static_cast<double>(m.rows());
        return out;
    }
};

inline HolidayPanel simulate_holiday_panel(const HolidayPanelSpec& s) {
    detail::require(s.effect_ratio.size() == s.holiday_days, "holiday panel: one effect ratio per holiday day");
    detail::require(s.years >= 1 && s.n_series >= 1, "holiday panel: need >= 1 year and >= 1 series");
    detail::require(std::abs(s.ar_phi) < 1.0, "holiday panel: |ar_phi| must be < 1");
    using namespace std::chrono;
    const std::int64_t start = dates::parse_iso(s.start_date);
    const auto y0 = dates::to_ymd(start).year();
    const std::int64_t end = sys_days{(y0 + years{static_cast<int>(s.years)}) / dates::to_ymd(start).month() /
                                      dates::to_ymd(start).day()}
                                 .time_since_epoch()
                                 .count();
    const std::size_t len = static_cast<std::size_t>(end - start);
    std::vector<std::int64_t> idx(len);
    for (std::size_t t = 0; t < len; ++t) idx[t] = start + static_cast<std::int64_t>(t);

    HolidayPanel out;
    std::vector<EventWindow> occ;
    for (std::size_t y = 0; y <= s.years; ++y) {
        const year_month_day first{y0 + years{static_cast<int>(y)}, month{static_cast<unsigned>(s.holiday_month)},
                                   day{static_cast<unsigned>(s.holiday_day)}};
        const std::int64_t f = sys_days{first}.time_since_epoch().count();
        if (f - 1 < start || f + static_cast<std::int64_t>(s.holiday_days) > end - 1) continue;
        occ.emplace_back(static_cast<std::size_t>(f - 1 - start), s.holiday_days);
    }
    for (const auto& w : occ) out.calendar.add(s.event_name, w);

    const double growth = std::log1p(s.annual_growth) / 365.25;
    const double two_pi = 2.0 * std::acos(-1.0);
    Matrix v(s.n_series, len);
    for (std::size_t o = 0; o < occ.size(); ++o) out.true_effect.emplace_back(s.n_series, s.holiday_days);
    NormalSampler z(s.seed);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < s.n_series; ++i) {
        ids.push_back("dept_" + std::to_string(i + 1));
        const double base = s.base_level * (1.0 + 0.2 * static_cast<double>(i));
        const double phase = 0.7 * static_cast<double>(i);
        const double sigma = s.ar_sigma_rel * base;
        double noise = sigma / std::sqrt(1.0 - s.ar_phi * s.ar_phi) * z();
        for (std::size_t t = 0; t < len; ++t) {
            if (t > 0) noise = s.ar_phi * noise + sigma * z();
            const double level = base * std::exp(growth * static_cast<double>(t));
            const double dow = static_cast<double>(idx[t] % 7);
            const double weekly = s.weekly_amplitude *
                                  (std::sin(two_pi * dow / 7.0 + phase) + 0.5 * std::cos(2.0 * two_pi * dow / 7.0));
            v(i, t) = level * (1.0 + weekly) + noise;
        }
        for (std::size_t o = 0; o < occ.size(); ++o)
            for (std::size_t k = 0; k < s.holiday_days; ++k) {
                const std::size_t t = occ[o].first() + k;
                const double effect = s.effect_ratio[k] * base * std::exp(growth * static_cast<double>(t));
                out.true_effect[o](i, k) = effect;
                v(i, t) += effect;
            }
    }
    out.panel = PanelSeries(std::move(v), std::move(idx), TimeKind::date, std::move(ids));
    return out;
}

}  // namespace rarefx::synthetic
