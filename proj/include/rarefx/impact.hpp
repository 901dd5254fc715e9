#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rarefx/ar_inference.hpp"
#include "rarefx/dates.hpp"
#include "rarefx/error.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/stats.hpp"

namespace rarefx::impact {

/// delta_hat[k] / scale.
inline std::vector<double> impact_ratio(const TreatmentEffectEstimate& est, double scale) {
    detail::require(std::isfinite(scale) && scale > 0.0,
                    "impact_ratio: scale must be > 0 (got " + std::to_string(scale) + ")");
    std::vector<double> r(est.delta_hat.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = est.delta_hat[k] / scale;
    return r;
}

enum class RatioAveraging { mean, median };

/// Year-normalized effects of one event: r_year = delta_hat_year / C_year.
class ImpactRatioModel {
public:
    struct YearEntry {
        std::vector<double> ratio;
        double scale = 1.0;
    };

    ImpactRatioModel() = default;
    explicit ImpactRatioModel(std::string event) : event_(std::move(event)) {}

    void add_year(int year, std::vector<double> ratio, double scale) {
        detail::require(std::isfinite(scale) && scale > 0.0, "impact model: scale must be > 0");
        detail::require(!ratio.empty(), "impact model: empty ratio vector");
        detail::require(per_year_.empty() || per_year_.begin()->second.ratio.size() == ratio.size(),
                        "impact model: ratio vectors must share one length");
        detail::require(!per_year_.contains(year), "impact model: duplicate year " + std::to_string(year));
        per_year_[year] = {std::move(ratio), scale};
    }

    void add_year(int year, const TreatmentEffectEstimate& est, double scale) {
        add_year(year, impact_ratio(est, scale), scale);
    }

    const std::string& event_name() const noexcept { return event_; }
    const std::map<int, YearEntry>& per_year() const noexcept { return per_year_; }
    bool empty() const noexcept { return per_year_.empty(); }

    /// Elementwise mean (or median) over years, summed in ascending year order.
    std::vector<double> averaged_ratio(RatioAveraging how = RatioAveraging::mean) const {
        if (per_year_.empty()) throw ValidationError("impact model '" + event_ + "' has no training years");
        const std::size_t d = per_year_.begin()->second.ratio.size();
        std::vector<double> out(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            std::vector<double> col;
            for (const auto& [year, e] : per_year_) col.push_back(e.ratio[k]);
            out[k] = how == RatioAveraging::mean ? stats::mean(col) : stats::median(col);
        }
        return out;
    }

private:
    std::string event_;
    std::map<int, YearEntry> per_year_;
};

/// r_bar * target_scale.
inline EffectVector predict_effect(const ImpactRatioModel& model, double target_scale,
                                   RatioAveraging how = RatioAveraging::mean) {
    detail::require(std::isfinite(target_scale) && target_scale > 0.0,
                    "predict_effect: target scale must be > 0");
    auto r = model.averaged_ratio(how);
    for (auto& v : r) v *= target_scale;
    return EffectVector(std::move(r));
}

enum class ScaleMode {
    pre_event_month,  // 30 days ending the day before t0-7
    calendar_month,   // month containing the first event day
};

inline constexpr std::size_t kRunUpBuffer = 7;
inline constexpr std::size_t kScaleDays = 30;

/// Year scale C: a mean daily value that ignores every day of `exclude`.
/// pre_event_month averages indices [t0-37, t0-8]; calendar_month averages the
/// calendar month of t0+1 and needs date labels in `time_index`.
inline double year_scale(std::span<const double> series, std::span<const std::int64_t> time_index,
                         TimeKind kind, const EventWindow& window, const EventCalendar& exclude,
                         ScaleMode mode = ScaleMode::pre_event_month) {
    window.check_fits(series.size() - 1);
    std::size_t lo = 0, hi = 0;  // inclusive index range
    if (mode == ScaleMode::pre_event_month) {
        detail::require(window.t0 >= kRunUpBuffer + 1, "year_scale: t0 too small for the run-up buffer");
        hi = window.t0 - kRunUpBuffer - 1;
        lo = hi >= kScaleDays - 1 ? hi - (kScaleDays - 1) : 0;
    } else {
        detail::require(kind == TimeKind::date && time_index.size() == series.size(),
                        "year_scale: calendar-month mode needs a date-indexed series");
        const auto [first, last] = dates::month_range(time_index[window.first()]);
        lo = window.first();
        while (lo > 0 && time_index[lo - 1] >= first) --lo;
        hi = window.first();
        while (hi + 1 < series.size() && time_index[hi + 1] <= last) ++hi;
    }
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t t = lo; t <= hi; ++t) {
        if (exclude.contains(t) || window.contains(t)) continue;
        s += series[t];
        ++n;
    }
    if (n == 0) throw NumericalError("year_scale: no non-event days available");
    return s / static_cast<double>(n);
}

/// 100 * mean_k |observed_k - predicted_k| / |observed_k|.
inline double evaluate_mape(std::span<const double> predicted, std::span<const double> observed) {
    detail::require(predicted.size() == observed.size() && !observed.empty(),
                    "evaluate_mape: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (observed[k] == 0.0)
            throw NumericalError("evaluate_mape: observed value is zero at index " + std::to_string(k));
        s += std::abs(observed[k] - predicted[k]) / std::abs(observed[k]);
    }
    return 100.0 * s / static_cast<double>(observed.size());
}

}  // namespace rarefx::impact
