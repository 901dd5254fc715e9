#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rarefx/error.hpp"
#include "rarefx/matrix.hpp"
#include "rarefx/random.hpp"

namespace rarefx {

/// How Y_0 of each simulated series is drawn.
struct InitialState {
    enum class Kind { fixed, stationary_draw };
    Kind kind = Kind::stationary_draw;
    double value = 0.0;  // used when kind == fixed

    static InitialState fixed(double v) { return {Kind::fixed, v}; }
    static InitialState stationary() { return {Kind::stationary_draw, 0.0}; }
};

/// Y_t = phi * Y_{t-1} + eps_t, eps_t ~ N(0, sigma^2).
class ARProcessSpec {
public:
    ARProcessSpec(double phi, double sigma, InitialState init = InitialState::stationary())
        : phi_(phi), sigma_(sigma), init_(init) {
        detail::require(std::isfinite(phi) && std::abs(phi) < 1.0,
                        "AR(1) spec: |phi| must be < 1 (got " + std::to_string(phi) + ")");
        // sigma == 0 is admitted for the noiseless reference processes.
        detail::require(std::isfinite(sigma) && sigma >= 0.0,
                        "AR(1) spec: sigma must be >= 0 (got " + std::to_string(sigma) + ")");
        detail::require(init.kind != InitialState::Kind::fixed || std::isfinite(init.value),
                        "AR(1) spec: fixed initial value must be finite");
    }

    double phi() const noexcept { return phi_; }
    double sigma() const noexcept { return sigma_; }
    const InitialState& initial() const noexcept { return init_; }

private:
    double phi_;
    double sigma_;
    InitialState init_;
};

/// sigma^2 / (1 - phi^2).
inline double stationary_variance(const ARProcessSpec& spec) {
    return spec.sigma() * spec.sigma() / (1.0 - spec.phi() * spec.phi());
}

enum class TimeKind { integer, date };

/// N series observed on a shared, strictly increasing time index t = 0..T.
/// Date labels are days since 1970-01-01.
class PanelSeries {
public:
    PanelSeries() = default;

    PanelSeries(Matrix values, std::vector<std::int64_t> time_index,
                TimeKind kind = TimeKind::integer, std::vector<std::string> series_ids = {})
        : values_(std::move(values)),
          time_index_(std::move(time_index)),
          kind_(kind),
          series_ids_(std::move(series_ids)) {
        detail::require(values_.rows() >= 1, "panel: need at least one series");
        detail::require(values_.cols() >= 2, "panel: need at least two time points (T >= 1)");
        detail::require(time_index_.size() == values_.cols(),
                        "panel: time index length must equal number of columns");
        for (std::size_t t = 1; t < time_index_.size(); ++t)
            detail::require(time_index_[t] > time_index_[t - 1],
                            "panel: time index must be strictly increasing");
        for (double v : values_.data())
            detail::require(std::isfinite(v), "panel: all values must be finite");
        if (series_ids_.empty())
            for (std::size_t i = 0; i < values_.rows(); ++i)
                series_ids_.push_back(std::to_string(i));
        detail::require(series_ids_.size() == values_.rows(),
                        "panel: one series id per row required");
    }

    /// Panel with integer time labels 0..cols-1.
    static PanelSeries with_integer_index(Matrix values) {
        std::vector<std::int64_t> idx(values.cols());
        for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = static_cast<std::int64_t>(t);
        return PanelSeries(std::move(values), std::move(idx));
    }

    std::size_t n_series() const noexcept { return values_.rows(); }
    /// Number of observations T+1.
    std::size_t length() const noexcept { return values_.cols(); }
    /// Last time index T.
    std::size_t last_index() const noexcept { return values_.cols() - 1; }

    const Matrix& values() const noexcept { return values_; }
    std::span<const double> series(std::size_t i) const { return values_.row(i); }
    double operator()(std::size_t i, std::size_t t) const noexcept { return values_(i, t); }

    const std::vector<std::int64_t>& time_index() const noexcept { return time_index_; }
    TimeKind time_kind() const noexcept { return kind_; }
    const std::vector<std::string>& series_ids() const noexcept { return series_ids_; }

    friend bool operator==(const PanelSeries&, const PanelSeries&) = default;

private:
    Matrix values_;
    std::vector<std::int64_t> time_index_;
    TimeKind kind_ = TimeKind::integer;
    std::vector<std::string> series_ids_;
};

/// Event occupying t0+1 .. t0+d; t0 is the last pre-event index.
struct EventWindow {
    std::size_t t0 = 1;
    std::size_t d = 1;

    EventWindow() = default;
    EventWindow(std::size_t t0_, std::size_t d_) : t0(t0_), d(d_) {
        detail::require(t0 >= 1, "event window: t0 must be >= 1");
        detail::require(d >= 1, "event window: d must be >= 1");
    }

    std::size_t first() const noexcept { return t0 + 1; }
    std::size_t last() const noexcept { return t0 + d; }
    bool contains(std::size_t t) const noexcept { return t > t0 && t <= t0 + d; }

    /// Throws BoundsError unless t0 + d <= last_index.
    void check_fits(std::size_t last_index) const {
        detail::require_bounds(t0 + d <= last_index,
                               "event window [" + std::to_string(first()) + ", " +
                                   std::to_string(last()) + "] exceeds last time index " +
                                   std::to_string(last_index));
    }
    void check_fits(const PanelSeries& panel) const { check_fits(panel.last_index()); }

    friend bool operator==(const EventWindow&, const EventWindow&) = default;
};

/// Named recurring events with non-overlapping occurrences sorted by t0.
class EventCalendar {
public:
    struct Event {
        std::string name;
        std::vector<EventWindow> occurrences;
    };

    void add(const std::string& name, EventWindow w) {
        auto it = std::find_if(events_.begin(), events_.end(),
                               [&](const Event& e) { return e.name == name; });
        if (it == events_.end()) {
            events_.push_back({name, {}});
            it = std::prev(events_.end());
        }
        auto& occ = it->occurrences;
        for (const auto& o : occ)
            detail::require(w.last() < o.first() || o.last() < w.first(),
                            "calendar: overlapping occurrences of event '" + name + "'");
        occ.insert(std::upper_bound(occ.begin(), occ.end(), w,
                                    [](const EventWindow& a, const EventWindow& b) {
                                        return a.t0 < b.t0;
                                    }),
                   w);
    }

    const std::vector<Event>& events() const noexcept { return events_; }
    bool empty() const noexcept { return events_.empty(); }

    const Event& event(const std::string& name) const {
        for (const auto& e : events_)
            if (e.name == name) return e;
        throw ValidationError("calendar: unknown event '" + name + "'");
    }

    /// True if t lies in any occurrence of any event.
    bool contains(std::size_t t) const noexcept {
        for (const auto& e : events_)
            for (const auto& w : e.occurrences)
                if (w.contains(t)) return true;
        return false;
    }

private:
    std::vector<Event> events_;
};

/// Per-period additive effects delta_{t0+1} .. delta_{t0+d}.
class EffectVector {
public:
    EffectVector() = default;
    explicit EffectVector(std::vector<double> delta) : delta_(std::move(delta)) {
        for (double v : delta_) detail::require(std::isfinite(v), "effect vector: non-finite entry");
    }

    std::size_t size() const noexcept { return delta_.size(); }
    double operator[](std::size_t k) const noexcept { return delta_[k]; }
    const std::vector<double>& values() const noexcept { return delta_; }

    EffectVector negated() const {
        std::vector<double> v(delta_);
        for (auto& x : v) x = -x;
        return EffectVector(std::move(v));
    }

private:
    std::vector<double> delta_;
};

/// Simulates n_series independent AR(1) paths of horizon+1 points from a
/// single xoshiro256** stream seeded with `seed`, row by row.
inline PanelSeries simulate_ar1_panel(const ARProcessSpec& spec, std::size_t n_series,
                                      std::size_t horizon, std::uint64_t seed) {
    detail::require(n_series >= 1, "simulate: n_series must be >= 1");
    detail::require(horizon >= 1, "simulate: horizon must be >= 1");
    Matrix y(n_series, horizon + 1);
    NormalSampler z(seed);
    const double phi = spec.phi();
    const double sigma = spec.sigma();
    const double sd0 = std::sqrt(stationary_variance(spec));
    for (std::size_t i = 0; i < n_series; ++i) {
        auto row = y.row(i);
        row[0] = spec.initial().kind == InitialState::Kind::fixed ? spec.initial().value : sd0 * z();
        for (std::size_t t = 1; t <= horizon; ++t) row[t] = phi * row[t - 1] + sigma * z();
    }
    return PanelSeries::with_integer_index(std::move(y));
}

/// Adds delta[k] to every series at t0+1+k.
inline PanelSeries inject_treatment(const PanelSeries& panel, const EventWindow& window,
                                    const EffectVector& delta) {
    window.check_fits(panel);
    detail::require(delta.size() == window.d, "inject_treatment: effect length " +
                                                  std::to_string(delta.size()) +
                                                  " != window size " + std::to_string(window.d));
    Matrix v = panel.values();
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t k = 0; k < window.d; ++k) v(i, window.first() + k) += delta[k];
    return PanelSeries(std::move(v), panel.time_index(), panel.time_kind(), panel.series_ids());
}

}  // namespace rarefx
