#include <gtest/gtest.h>

#include <set>

#include "rarefx/montecarlo.hpp"
#include "rarefx/random.hpp"
#include "support.hpp"

using namespace rarefx;

namespace {

mc::MCConfig base_config(double phi, std::size_t n, std::size_t t0, std::vector<double> delta, std::size_t reps,
                         std::uint64_t seed) {
    mc::MCConfig c;
    c.spec = ARProcessSpec(phi, 1.0);
    c.n_series = n;
    c.window = EventWindow(t0, delta.size());
    c.delta = EffectVector(std::move(delta));
    c.replications = reps;
    c.master_seed = seed;
    return c;
}

bool same_report(const mc::MonteCarloReport& a, const mc::MonteCarloReport& b) {
    if (a.per_component.size() != b.per_component.size()) return false;
    for (std::size_t k = 0; k < a.per_component.size(); ++k) {
        const auto &x = a.per_component[k], &y = b.per_component[k];
        if (x.mean_bias != y.mean_bias || x.empirical_var_scaled != y.empirical_var_scaled ||
            x.ci_coverage != y.ci_coverage || x.skewness != y.skewness || x.excess_kurtosis != y.excess_kurtosis)
            return false;
    }
    return a.cross_cov_scaled == b.cross_cov_scaled && a.cross_cov_stderr == b.cross_cov_stderr &&
           a.phi_hat_mean == b.phi_hat_mean && a.phi_hat_sd == b.phi_hat_sd && a.standardized == b.standardized;
}

}  // namespace

TEST(SeedMixing, DistinctStreamsAndReproducible) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 10000; ++r) seen.insert(mix_seed(7, r));
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
    EXPECT_NE(mix_seed(7, 3), mix_seed(8, 3));
    // SplitMix64 reference output for state 0 (first draw).
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(RunReplications, AggregatesPerReplicationEstimates) {
    const auto cfg = base_config(0.4, 50, 20, {1.0, -2.0}, 40, 5);
    const auto rep = mc::run_replications(cfg);
    // Recompute every replication independently and aggregate in test code.
    std::vector<std::vector<double>> e(2);
    std::vector<double> cover(2, 0.0);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        auto p = simulate_ar1_panel(cfg.spec, cfg.n_series, 22, mix_seed(cfg.master_seed, r));
        p = inject_treatment(p, cfg.window, cfg.delta);
        const auto est = estimate_ar1_effect(p, cfg.window);
        const auto ci = confidence_intervals(est, est.covariance, 0.95);
        for (std::size_t k = 0; k < 2; ++k) {
            e[k].push_back(std::sqrt(50.0) * (est.delta_hat[k] - cfg.delta[k]));
            cover[k] += ci[k].lower <= cfg.delta[k] && cfg.delta[k] <= ci[k].upper;
        }
    }
    for (std::size_t k = 0; k < 2; ++k) {
        long double m = 0;
        for (double v : e[k]) m += v;
        m /= e[k].size();
        long double ss = 0;
        for (double v : e[k]) ss += (v - m) * (v - m);
        EXPECT_NEAR(rep.per_component[k].mean_bias, static_cast<double>(m), 1e-12);
        EXPECT_NEAR(rep.per_component[k].empirical_var_scaled, static_cast<double>(ss / (e[k].size() - 1)), 1e-12);
        EXPECT_DOUBLE_EQ(rep.per_component[k].ci_coverage, cover[k] / 40.0);
        EXPECT_GE(rep.per_component[k].ci_coverage, 0.0);
        EXPECT_LE(rep.per_component[k].ci_coverage, 1.0);
    }
    long double c01 = 0, m0 = 0, m1 = 0;
    for (std::size_t r = 0; r < 40; ++r) m0 += e[0][r], m1 += e[1][r];
    m0 /= 40, m1 /= 40;
    for (std::size_t r = 0; r < 40; ++r) c01 += (e[0][r] - m0) * (e[1][r] - m1);
    EXPECT_NEAR(rep.cross_cov_scaled(0, 1), static_cast<double>(c01 / 39), 1e-12);
    EXPECT_TRUE(rep.cross_cov_scaled.is_symmetric());
    EXPECT_TRUE(rep.cross_cov_oracle.is_symmetric());
    EXPECT_DOUBLE_EQ(rep.per_component[1].theoretical_var_finite, 1.0 + 0.16);
    EXPECT_DOUBLE_EQ(rep.per_component[1].theoretical_var_asymptotic, 1.0 / (1.0 - 0.16));
}

TEST(RunReplications, IdenticalForAnyThreadCount) {
    const auto cfg1 = base_config(0.5, 200, 30, {2.0, -1.0, 0.5}, 64, 11);
    auto cfg4 = cfg1;
    cfg4.threads = 4;
    auto cfg7 = cfg1;
    cfg7.threads = 7;
    const auto a = mc::run_replications(cfg1);
    EXPECT_TRUE(same_report(a, mc::run_replications(cfg4)));
    EXPECT_TRUE(same_report(a, mc::run_replications(cfg7)));
}

TEST(RunReplications, WhiteNoiseVarianceAndCoverage) {
    auto cfg = base_config(0.0, 5000, 50, {0.0}, 2000, 3);
    const auto rep = mc::run_replications(cfg);
    EXPECT_NEAR(rep.per_component[0].empirical_var_scaled, 1.0, 0.10);
    EXPECT_NEAR(rep.per_component[0].ci_coverage, 0.95, 0.015);
}

TEST(RunReplications, DegenerateReplicationNamesIndex) {
    mc::MCConfig cfg = base_config(0.5, 3, 5, {0.0}, 4, 1);
    cfg.spec = ARProcessSpec(0.5, 0.0, InitialState::fixed(0.0));
    try {
        mc::run_replications(cfg);
        FAIL() << "expected an error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("replication 0"), std::string::npos) << e.what();
    }
}

TEST(RunReplications, InvalidConfig) {
    auto cfg = base_config(0.5, 10, 5, {1.0, 2.0}, 10, 1);
    cfg.delta = EffectVector({1.0});
    EXPECT_THROW(mc::run_replications(cfg), ValidationError);
    cfg = base_config(0.5, 10, 5, {1.0}, 0, 1);
    EXPECT_THROW(mc::run_replications(cfg), ValidationError);
}

class MidSizeRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        report_ = new mc::MonteCarloReport(mc::run_replications(base_config(0.5, 1000, 100, {2.0, -1.0, 0.5}, 2000, 7)));
    }
    static void TearDownTestSuite() { delete report_; }
    static mc::MonteCarloReport* report_;
};
mc::MonteCarloReport* MidSizeRun::report_ = nullptr;

TEST_F(MidSizeRun, NormalityDiagnosticsPass) {
    const auto diag = mc::check_normality(*report_);
    for (std::size_t k = 0; k < diag.components.size(); ++k) {
        const auto& c = report_->per_component[k];
        EXPECT_TRUE(diag.components[k].all())
            << "k=" << k << " bias=" << c.mean_bias << " skew=" << c.skewness << " kurt=" << c.excess_kurtosis
            << " cover=" << c.ci_coverage;
    }
}

TEST_F(MidSizeRun, VarianceWithinTenPercentOfFiniteHorizon) {
    for (const auto& c : report_->per_component)
        EXPECT_NEAR(c.empirical_var_scaled / c.theoretical_var_finite, 1.0, 0.10);
}

TEST_F(MidSizeRun, CrossCovarianceTracksMaOracleNotZero) {
    const auto& emp = report_->cross_cov_scaled;
    const auto& orc = report_->cross_cov_oracle;
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l)
            if (std::abs(orc(k, l)) >= 0.2) {
                EXPECT_NEAR(emp(k, l) / orc(k, l), 1.0, 0.15) << k << "," << l;
            }
    EXPECT_TRUE(report_->offdiagonal_nonzero);
    EXPECT_GT(report_->max_offdiagonal_z, 4.0);
}

TEST_F(MidSizeRun, PhiHatMeanWithinThreeStandardErrors) {
    EXPECT_LT(std::abs(report_->phi_hat_mean - 0.5), 3.0 * report_->phi_hat_sd / std::sqrt(2000.0));
}

TEST(CheckNormality, AsymptoticVarianceNearUnitRootOverCovers) {
    auto cfg = base_config(0.9, 1000, 100, {0.0}, 600, 9);
    cfg.ci_variance = VarianceMode::asymptotic_diagonal;
    const auto rep = mc::run_replications(cfg);
    const auto diag = mc::check_normality(rep);
    EXPECT_FALSE(diag.components[0].coverage_ok);
    EXPECT_GT(rep.per_component[0].ci_coverage, 0.99);
}

TEST(CheckNormality, TooFewReplications) {
    const auto rep = mc::run_replications(base_config(0.5, 50, 10, {0.0}, 10, 1));
    EXPECT_THROW(mc::check_normality(rep), ValidationError);
}

TEST(RateCheck, NearUnitRootStillRootN) {
    const auto rr = mc::rate_check_phi(ARProcessSpec(0.9, 1.0), 50, {250, 1000}, 2000, 17);
    ASSERT_EQ(rr.sd_ratios.size(), 1u);
    EXPECT_GE(rr.sd_ratios[0], 1.6);
    EXPECT_LE(rr.sd_ratios[0], 2.4);
    EXPECT_DOUBLE_EQ(rr.expected_ratios[0], 2.0);
}

TEST(RateCheck, NoiselessHasZeroSpread) {
    const auto rr = mc::rate_check_phi(ARProcessSpec(0.6, 0.0, InitialState::fixed(1.0)), 50, {50, 200}, 20, 1);
    for (const auto& row : rr.rows) {
        EXPECT_LT(row.phi_hat_sd, 1e-14);
        EXPECT_NEAR(row.phi_hat_mean, 0.6, 1e-15);
    }
}

TEST(RateCheck, Preconditions) {
    const ARProcessSpec s(0.5, 1.0);
    EXPECT_THROW(mc::rate_check_phi(s, 50, {250}, 10, 1), ValidationError);
    EXPECT_THROW(mc::rate_check_phi(s, 50, {49, 250}, 10, 1), ValidationError);
}

TEST(RateCheck, ThreadCountDoesNotMatter) {
    const ARProcessSpec s(0.6, 1.0);
    const auto a = mc::rate_check_phi(s, 20, {50, 200}, 100, 3, 1);
    const auto b = mc::rate_check_phi(s, 20, {50, 200}, 100, 3, 5);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t j = 0; j < a.rows.size(); ++j) {
        EXPECT_EQ(a.rows[j].phi_hat_mean, b.rows[j].phi_hat_mean);
        EXPECT_EQ(a.rows[j].phi_hat_sd, b.rows[j].phi_hat_sd);
    }
}
