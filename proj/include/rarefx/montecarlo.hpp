#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rarefx/ar_inference.hpp"
#include "rarefx/error.hpp"
#include "rarefx/matrix.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/parallel.hpp"
#include "rarefx/random.hpp"
#include "rarefx/stats.hpp"

namespace rarefx::mc {

/// How delta_hat is standardized before the skewness/kurtosis diagnostics.
enum class Standardization {
    oracle,     // true sigma, phi
    estimated,  // per-replication sigma2_hat, phi_hat
};

struct MCConfig {
    ARProcessSpec spec{0.5, 1.0};
    std::size_t n_series = 1000;
    EventWindow window{100, 3};
    EffectVector delta{std::vector<double>{0.0, 0.0, 0.0}};
    std::size_t replications = 1000;
    std::uint64_t master_seed = 0;
    double ci_level = 0.95;
    VarianceMode ci_variance = VarianceMode::finite_horizon;
    Standardization standardization = Standardization::oracle;
    std::size_t threads = 1;  // results do not depend on this

    void validate() const {
        detail::require(n_series >= 1, "mc: n_series must be >= 1");
        detail::require(replications >= 1, "mc: replications must be >= 1");
        detail::require(delta.size() == window.d, "mc: delta length must equal window size d");
        detail::require(ci_level > 0.0 && ci_level < 1.0, "mc: ci_level must lie in (0, 1)");
    }
};

struct ComponentStats {
    double mean_bias = 0.0;             // mean of sqrt(N)(delta_hat_k - delta_k)
    double empirical_var_scaled = 0.0;  // var of sqrt(N)(delta_hat_k - delta_k)
    double theoretical_var_finite = 0.0;
    double theoretical_var_asymptotic = 0.0;
    double ci_coverage = 0.0;
    double skewness = 0.0;         // of the standardized estimate
    double excess_kurtosis = 0.0;  // of the standardized estimate
};

struct MonteCarloReport {
    std::size_t replications = 0;
    std::size_t n_series = 0;
    double ci_level = 0.95;
    VarianceMode ci_variance = VarianceMode::finite_horizon;
    std::vector<ComponentStats> per_component;
    Matrix cross_cov_scaled;
    Matrix cross_cov_oracle;
    /// Standard error of each empirical cross-covariance entry.
    Matrix cross_cov_stderr;
    double phi_hat_mean = 0.0;
    double phi_hat_sd = 0.0;
    /// True when some off-diagonal empirical covariance is more than four
    /// standard errors from zero, i.e. a diagonal limiting covariance is rejected.
    bool offdiagonal_nonzero = false;
    double max_offdiagonal_z = 0.0;
    /// R x d standardized estimates used by the normality diagnostics.
    Matrix standardized;
};

/// Runs `replications` independent simulate/inject/fit/forecast/estimate
/// cycles. Replication r uses seed mix_seed(master_seed, r); aggregation runs
/// in replication order, so the report is identical for any thread count.
inline MonteCarloReport run_replications(const MCConfig& cfg) {
    cfg.validate();
    cfg.window.check_fits(cfg.window.t0 + cfg.window.d);
    const std::size_t d = cfg.window.d;
    const std::size_t R = cfg.replications;
    const double sqrt_n = std::sqrt(static_cast<double>(cfg.n_series));
    const double phi = cfg.spec.phi();
    const double sigma2 = cfg.spec.sigma() * cfg.spec.sigma();

    std::vector<double> phi_hat(R);
    std::vector<double> scaled_err(R * d);  // sqrt(N)(delta_hat - delta)
    std::vector<double> standardized(R * d);
    std::vector<unsigned char> covered(R * d);
    const Matrix true_cov = cross_covariance_oracle(phi, sigma2, d);

    detail::parallel_for(R, cfg.threads, [&](std::size_t r) {
        try {
            auto panel = simulate_ar1_panel(cfg.spec, cfg.n_series, cfg.window.t0 + d,
                                            mix_seed(cfg.master_seed, r));
            panel = inject_treatment(panel, cfg.window, cfg.delta);
            ARModelFit fit;
            const auto est = estimate_ar1_effect(panel, cfg.window, cfg.ci_variance, &fit);
            const auto ci = confidence_intervals(est, est.covariance, cfg.ci_level);
            const Matrix est_fh =
                cfg.standardization == Standardization::estimated
                    ? effect_covariance(fit, cfg.window, 1, VarianceMode::finite_horizon)
                    : Matrix{};
            phi_hat[r] = fit.phi_hat;
            for (std::size_t k = 0; k < d; ++k) {
                const double e = sqrt_n * (est.delta_hat[k] - cfg.delta[k]);
                scaled_err[r * d + k] = e;
                const double sd = cfg.standardization == Standardization::oracle
                                      ? std::sqrt(true_cov(k, k))
                                      : std::sqrt(est_fh(k, k));
                standardized[r * d + k] = sd > 0.0 ? e / sd : 0.0;
                covered[r * d + k] = ci[k].lower <= cfg.delta[k] && cfg.delta[k] <= ci[k].upper;
            }
        } catch (const Error& e) {
            throw NumericalError("replication " + std::to_string(r) + ": " + e.what());
        }
    });

    MonteCarloReport rep;
    rep.replications = R;
    rep.n_series = cfg.n_series;
    rep.ci_level = cfg.ci_level;
    rep.ci_variance = cfg.ci_variance;
    rep.cross_cov_oracle = true_cov;
    rep.phi_hat_mean = stats::mean(phi_hat);
    rep.phi_hat_sd = std::sqrt(stats::variance(phi_hat));

    std::vector<std::vector<double>> col(d, std::vector<double>(R));
    std::vector<double> zcol(R);
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < R; ++r) {
            col[k][r] = scaled_err[r * d + k];
            zcol[r] = standardized[r * d + k];
            hits += covered[r * d + k];
        }
        ComponentStats c;
        c.mean_bias = stats::mean(col[k]);
        c.empirical_var_scaled = stats::variance(col[k]);
        c.theoretical_var_finite = true_cov(k, k);
        c.theoretical_var_asymptotic = sigma2 / (1.0 - phi * phi);
        c.ci_coverage = static_cast<double>(hits) / static_cast<double>(R);
        c.skewness = stats::skewness(zcol);
        c.excess_kurtosis = stats::excess_kurtosis(zcol);
        rep.per_component.push_back(c);
    }
    rep.standardized = Matrix(R, d);
    std::copy(standardized.begin(), standardized.end(), rep.standardized.data().begin());
    rep.cross_cov_scaled = Matrix(d, d);
    rep.cross_cov_stderr = Matrix(d, d);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = k; l < d; ++l) {
            const double c = k == l ? rep.per_component[k].empirical_var_scaled
                                    : stats::covariance(col[k], col[l]);
            rep.cross_cov_scaled(k, l) = rep.cross_cov_scaled(l, k) = c;
            const double vk = rep.per_component[k].empirical_var_scaled;
            const double vl = rep.per_component[l].empirical_var_scaled;
            const double se = std::sqrt((vk * vl + c * c) / static_cast<double>(R));
            rep.cross_cov_stderr(k, l) = rep.cross_cov_stderr(l, k) = se;
            if (k != l && se > 0.0) {
                const double z = std::abs(c) / se;
                rep.max_offdiagonal_z = std::max(rep.max_offdiagonal_z, z);
                if (z > 4.0) rep.offdiagonal_nonzero = true;
            }
        }
    return rep;
}

struct NormalityThresholds {
    double max_abs_skewness = 0.15;
    double max_abs_excess_kurtosis = 0.3;
    double coverage_tolerance = 0.015;
    std::size_t min_replications = 500;
};

struct ComponentDiagnostics {
    bool bias_ok = false;
    bool skewness_ok = false;
    bool kurtosis_ok = false;
    bool coverage_ok = false;
    bool all() const noexcept { return bias_ok && skewness_ok && kurtosis_ok && coverage_ok; }
};

struct NormalityDiagnostics {
    std::vector<ComponentDiagnostics> components;
    bool all_pass() const noexcept {
        for (const auto& c : components)
            if (!c.all()) return false;
        return true;
    }
};

inline NormalityDiagnostics check_normality(const MonteCarloReport& report,
                                            const NormalityThresholds& th = {}) {
    if (report.replications < th.min_replications)
        throw ValidationError("check_normality: insufficient data (" +
                              std::to_string(report.replications) + " replications, need " +
                              std::to_string(th.min_replications) + ")");
    NormalityDiagnostics out;
    const double sqrt_r = std::sqrt(static_cast<double>(report.replications));
    for (const auto& c : report.per_component) {
        ComponentDiagnostics g;
        g.bias_ok = std::abs(c.mean_bias) < 3.0 * std::sqrt(c.empirical_var_scaled) / sqrt_r;
        g.skewness_ok = std::abs(c.skewness) < th.max_abs_skewness;
        g.kurtosis_ok = std::abs(c.excess_kurtosis) < th.max_abs_excess_kurtosis;
        g.coverage_ok = std::abs(c.ci_coverage - report.ci_level) <= th.coverage_tolerance;
        out.components.push_back(g);
    }
    return out;
}

struct RateRow {
    std::size_t n_series = 0;
    double phi_hat_mean = 0.0;
    double phi_hat_sd = 0.0;
};

struct RateReport {
    std::vector<RateRow> rows;
    /// sd(N_j) / sd(N_{j+1}) for consecutive grid entries (NaN when sd(N_{j+1}) = 0).
    std::vector<double> sd_ratios;
    /// sqrt(N_{j+1} / N_j), the ratio implied by an N^{-1/2} rate.
    std::vector<double> expected_ratios;
};

/// Empirical sd of phi_hat over `reps` panels at each N of the grid.
inline RateReport rate_check_phi(const ARProcessSpec& spec, std::size_t t0,
                                 const std::vector<std::size_t>& n_grid, std::size_t reps,
                                 std::uint64_t master_seed, std::size_t threads = 1) {
    detail::require(n_grid.size() >= 2, "rate_check: n_grid needs at least two entries");
    for (auto n : n_grid) detail::require(n >= 50, "rate_check: every grid entry must be >= 50");
    detail::require(reps >= 2, "rate_check: reps must be >= 2");
    detail::require(t0 >= 1, "rate_check: t0 must be >= 1");
    RateReport out;
    for (std::size_t j = 0; j < n_grid.size(); ++j) {
        std::vector<double> phis(reps);
        const std::uint64_t grid_seed = mix_seed(master_seed, 0x5241544500000000ULL + j);
        detail::parallel_for(reps, threads, [&](std::size_t r) {
            try {
                const auto panel = simulate_ar1_panel(spec, n_grid[j], t0, mix_seed(grid_seed, r));
                phis[r] = fit_ar1_ols(panel, t0).phi_hat;
            } catch (const Error& e) {
                throw NumericalError("rate_check N=" + std::to_string(n_grid[j]) +
                                     " replication " + std::to_string(r) + ": " + e.what());
            }
        });
        out.rows.push_back({n_grid[j], stats::mean(phis), std::sqrt(stats::variance(phis))});
    }
    for (std::size_t j = 0; j + 1 < out.rows.size(); ++j) {
        const double denom = out.rows[j + 1].phi_hat_sd;
        out.sd_ratios.push_back(denom > 0.0 ? out.rows[j].phi_hat_sd / denom : std::nan(""));
        out.expected_ratios.push_back(std::sqrt(static_cast<double>(out.rows[j + 1].n_series) /
                                                static_cast<double>(out.rows[j].n_series)));
    }
    return out;
}

}  // namespace rarefx::mc
