#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rarefx/error.hpp"
#include "rarefx/matrix.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/stats.hpp"

namespace rarefx {

struct ARModelFit {
    double phi_hat = 0.0;
    double sigma2_hat = 0.0;   // mean squared residual, no dof correction
    std::size_t n_pairs = 0;   // (Y_{t-1}, Y_t) pairs pooled across series
};

/// Ŷ_{i,t}(0) for the d window periods; column k = phi_hat^(k+1) * Y_{i,t0}.
struct CounterfactualPanel {
    EventWindow window;
    Matrix values;  // N x d
};

enum class VarianceMode { asymptotic_diagonal, finite_horizon };

inline const char* to_string(VarianceMode m) {
    return m == VarianceMode::finite_horizon ? "finite_horizon" : "asymptotic_diagonal";
}

struct TreatmentEffectEstimate {
    EventWindow window;
    std::vector<double> delta_hat;
    std::size_t n_series = 0;
    Matrix covariance;  // variance of delta_hat itself (already divided by N); empty if unset
    VarianceMode variance_mode = VarianceMode::finite_horizon;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Pooled OLS of Y_t on Y_{t-1} over t = 1..t0 of every series.
inline ARModelFit fit_ar1_ols(const PanelSeries& panel, std::size_t t0) {
    detail::require_bounds(t0 >= 1 && t0 <= panel.last_index(),
                           "fit_ar1_ols: t0=" + std::to_string(t0) + " outside [1, " +
                               std::to_string(panel.last_index()) + "]");
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        const auto y = panel.series(i);
        for (std::size_t t = 1; t <= t0; ++t) {
            sxy += y[t - 1] * y[t];
            sxx += y[t - 1] * y[t - 1];
        }
    }
    if (!(sxx > 0.0))
        throw NumericalError("fit_ar1_ols: degenerate denominator (pre-event lagged values all zero)");
    ARModelFit fit;
    fit.phi_hat = sxy / sxx;
    fit.n_pairs = panel.n_series() * t0;
    double ssr = 0.0;
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        const auto y = panel.series(i);
        for (std::size_t t = 1; t <= t0; ++t) {
            const double r = y[t] - fit.phi_hat * y[t - 1];
            ssr += r * r;
        }
    }
    fit.sigma2_hat = ssr / static_cast<double>(fit.n_pairs);
    return fit;
}

/// Recursive forecast Ŷ_t = phi_hat * Ŷ_{t-1} anchored at the observed Y_{t0}.
inline CounterfactualPanel forecast_counterfactual(const ARModelFit& fit, const PanelSeries& panel,
                                                   const EventWindow& window) {
    window.check_fits(panel);
    CounterfactualPanel cf{window, Matrix(panel.n_series(), window.d)};
    for (std::size_t i = 0; i < panel.n_series(); ++i) {
        double y = panel(i, window.t0);
        for (std::size_t k = 0; k < window.d; ++k) {
            y *= fit.phi_hat;
            cf.values(i, k) = y;
        }
    }
    return cf;
}

/// delta_hat[k] = mean_i (Y_{i,t0+1+k} - Ŷ_{i,t0+1+k}(0)).
inline TreatmentEffectEstimate estimate_effect(const PanelSeries& panel,
                                               const CounterfactualPanel& cf,
                                               const EventWindow& window) {
    window.check_fits(panel);
    detail::require(cf.values.rows() == panel.n_series() && cf.values.cols() == window.d,
                    "estimate_effect: counterfactual is " + std::to_string(cf.values.rows()) + "x" +
                        std::to_string(cf.values.cols()) + ", expected " +
                        std::to_string(panel.n_series()) + "x" + std::to_string(window.d));
    detail::require(cf.window == window, "estimate_effect: counterfactual built for another window");
    TreatmentEffectEstimate est;
    est.window = window;
    est.n_series = panel.n_series();
    est.delta_hat.assign(window.d, 0.0);
    for (std::size_t k = 0; k < window.d; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < panel.n_series(); ++i)
            s += panel(i, window.first() + k) - cf.values(i, k);
        est.delta_hat[k] = s / static_cast<double>(panel.n_series());
    }
    return est;
}

/// Diagonal covariance of delta_hat. asymptotic_diagonal: sigma^2/((1-phi^2) N);
/// finite_horizon: sigma^2 (1 - phi^{2(k+1)}) / ((1-phi^2) N). Off-diagonals are
/// zero in both modes even though the prediction errors are serially
/// correlated (see cross_covariance_oracle).
inline Matrix effect_covariance(const ARModelFit& fit, const EventWindow& window,
                                std::size_t n_series, VarianceMode mode) {
    detail::require(n_series >= 1, "effect_covariance: n_series must be >= 1");
    const double phi = fit.phi_hat;
    const double n = static_cast<double>(n_series);
    Matrix cov(window.d, window.d);
    if (mode == VarianceMode::asymptotic_diagonal) {
        if (!(std::abs(phi) < 1.0))
            throw NumericalError("effect_covariance: nonstationary fit (|phi_hat| = " +
                                 std::to_string(std::abs(phi)) + " >= 1)");
        const double v = fit.sigma2_hat / ((1.0 - phi * phi) * n);
        for (std::size_t k = 0; k < window.d; ++k) cov(k, k) = v;
        return cov;
    }
    // Partial sums of phi^{2j} avoid the 0/0 at |phi| = 1.
    double acc = 0.0, p = 1.0;
    for (std::size_t k = 0; k < window.d; ++k) {
        acc += p;
        p *= phi * phi;
        cov(k, k) = fit.sigma2_hat * acc / n;
    }
    return cov;
}

/// Cov(sqrt(N)(delta_hat_k - delta_k), sqrt(N)(delta_hat_l - delta_l)) implied by
/// the MA(inf) form of the forecast error, for 0-based window offsets k, l:
/// sigma^2 phi^|k-l| (1 - phi^{2(min(k,l)+1)}) / (1 - phi^2).
inline Matrix cross_covariance_oracle(double phi, double sigma2, std::size_t d) {
    Matrix c(d, d);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
            const std::size_t lag = k > l ? k - l : l - k;
            const std::size_t m = std::min(k, l) + 1;
            double acc = 0.0, p = 1.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += p;
                p *= phi * phi;
            }
            c(k, l) = sigma2 * std::pow(phi, static_cast<double>(lag)) * acc;
        }
    return c;
}

/// delta_hat[k] -/+ z_{(1+level)/2} sqrt(cov[k][k]).
inline std::vector<Interval> confidence_intervals(const TreatmentEffectEstimate& est,
                                                  const Matrix& covariance, double level) {
    detail::require(level > 0.0 && level < 1.0, "confidence_intervals: level must lie in (0, 1)");
    detail::require(covariance.rows() == est.delta_hat.size() &&
                        covariance.cols() == est.delta_hat.size(),
                    "confidence_intervals: covariance dimension mismatch");
    const double z = stats::normal_quantile(0.5 * (1.0 + level));
    std::vector<Interval> out(est.delta_hat.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double v = covariance(k, k);
        detail::require(v >= 0.0, "confidence_intervals: negative variance");
        const double half = z * std::sqrt(v);
        out[k] = {est.delta_hat[k] - half, est.delta_hat[k] + half};
    }
    return out;
}

/// fit -> forecast -> estimate, with covariance attached.
inline TreatmentEffectEstimate estimate_ar1_effect(const PanelSeries& panel,
                                                   const EventWindow& window,
                                                   VarianceMode mode = VarianceMode::finite_horizon,
                                                   ARModelFit* fit_out = nullptr) {
    window.check_fits(panel);
    const ARModelFit fit = fit_ar1_ols(panel, window.t0);
    auto est = estimate_effect(panel, forecast_counterfactual(fit, panel, window), window);
    est.covariance = effect_covariance(fit, window, panel.n_series(), mode);
    est.variance_mode = mode;
    if (fit_out) *fit_out = fit;
    return est;
}

}  // namespace rarefx
