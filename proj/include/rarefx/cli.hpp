#pragma once

#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rarefx/ar_inference.hpp"
#include "rarefx/baselines.hpp"
#include "rarefx/forecaster.hpp"
#include "rarefx/impact.hpp"
#include "rarefx/io.hpp"
#include "rarefx/montecarlo.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/pipeline.hpp"
#include "rarefx/report.hpp"
#include "rarefx/synthetic.hpp"

namespace rarefx::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

namespace internal {

using report::format_real;

/// Flags shared by the commands that train the feedforward forecaster.
struct TrainFlags {
    std::size_t lookback = 90, horizon = 30, stride = 1;
    std::vector<std::size_t> hidden{32, 32};
    std::string activation = "relu";
    std::size_t epochs = 100, batch = 64;
    double lr = 1e-3;
    std::string optimizer = "adam";
    double w1 = 0.1, w2 = 1.0;
    std::string distance = "absolute";
    std::string adaptation = "fixed";
    double floor = 0.05;
    std::string aggregation = "mean";

    void add(CLI::App& app, bool with_loss) {
        app.add_option("--lookback", lookback, "Lookback window M")->check(CLI::PositiveNumber);
        app.add_option("--horizon", horizon, "Forecast horizon H")->check(CLI::PositiveNumber);
        app.add_option("--stride", stride, "Rolling-window stride s")->check(CLI::PositiveNumber);
        app.add_option("--hidden", hidden, "Hidden layer sizes")->delimiter(',');
        app.add_option("--activation", activation)->check(CLI::IsMember({"relu", "tanh"}));
        app.add_option("--epochs", epochs)->check(CLI::PositiveNumber);
        app.add_option("--batch", batch)->check(CLI::PositiveNumber);
        app.add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber);
        app.add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
        app.add_option("--aggregation", aggregation, "Overlap aggregation")->check(CLI::IsMember({"mean", "median"}));
        if (with_loss) {
            app.add_option("--w1", w1, "Rare-window loss weight");
            app.add_option("--w2", w2, "Non-rare loss weight");
            app.add_option("--distance", distance)->check(CLI::IsMember({"absolute", "squared"}));
            app.add_option("--adaptation", adaptation)->check(CLI::IsMember({"fixed", "residual_inverse"}));
            app.add_option("--floor", floor, "Residual floor for residual_inverse weights");
        }
    }

    pipeline::PipelineConfig config(std::uint64_t seed) const {
        pipeline::PipelineConfig c;
        c.windows = {lookback, horizon, stride};
        c.arch.hidden = hidden;
        c.arch.activation = activation == "relu" ? forecast::Activation::relu : forecast::Activation::tanh;
        c.train.epochs = epochs;
        c.train.batch_size = batch;
        c.train.learning_rate = lr;
        c.train.seed = seed;
        c.train.optimizer = optimizer == "adam" ? forecast::Optimizer::adam : forecast::Optimizer::sgd;
        c.loss.w1 = w1;
        c.loss.w2 = w2;
        c.loss.distance = distance == "absolute" ? forecast::Distance::absolute : forecast::Distance::squared;
        c.loss.adaptation = adaptation == "fixed" ? forecast::WeightAdaptation::fixed
                                                  : forecast::WeightAdaptation::residual_inverse;
        c.loss.floor = floor;
        c.aggregation = aggregation == "mean" ? forecast::OverlapAggregation::mean
                                              : forecast::OverlapAggregation::median;
        c.windows.validate();
        c.loss.validate();
        c.train.validate();
        return c;
    }
};

/// Event window given either as --t0/--d or as --calendar/--event/--occurrence.
struct WindowFlags {
    std::size_t t0 = 0, d = 0;
    std::string calendar, event;
    int occurrence = -1;  // -1 = last

    void add(CLI::App& app) {
        app.add_option("--t0", t0, "Last pre-event time index");
        app.add_option("--d", d, "Event window length");
        app.add_option("--calendar", calendar, "Event calendar CSV (event,start_date,end_date)");
        app.add_option("--event", event, "Event name in the calendar");
        app.add_option("--occurrence", occurrence, "Occurrence index (default: last)");
    }

    EventWindow resolve(const PanelSeries& panel) const {
        if (!calendar.empty()) {
            const auto cal = io::bind_calendar(io::load_calendar(calendar), panel);
            const auto& ev = event.empty() ? cal.events().front() : cal.event(event);
            const auto& occ = ev.occurrences;
            const std::size_t j = occurrence < 0 ? occ.size() - 1 : static_cast<std::size_t>(occurrence);
            detail::require(j < occ.size(), "occurrence index out of range");
            return occ[j];
        }
        detail::require(t0 >= 1 && d >= 1, "give either --calendar/--event or --t0 and --d");
        EventWindow w(t0, d);
        w.check_fits(panel);
        return w;
    }
};

inline std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
}

inline EventCalendar load_bound_calendar(const std::string& path, const PanelSeries& panel) {
    return io::bind_calendar(io::load_calendar(path), panel);
}

/// event,year,series_id,k,delta_hat rows of one method's per-series effects.
inline std::string effects_csv(const PanelSeries& panel, const std::string& event,
                               const std::vector<EventWindow>& occ, const pipeline::MethodEffects& m) {
    std::ostringstream os;
    os << "event,year,series_id,k,delta_hat\n";
    for (std::size_t o = 0; o < occ.size(); ++o)
        for (std::size_t i = 0; i < panel.n_series(); ++i)
            for (std::size_t k = 0; k < occ[o].d; ++k)
                os << event << ',' << pipeline::occurrence_year(panel, occ[o], o) << ','
                   << panel.series_ids()[i] << ',' << k + 1 << ',' << format_real(m.effects[o][i][k]) << '\n';
    return os.str();
}

/// event,year,k,delta_hat rows of the cross-series mean effect.
inline std::string panel_effects_csv(const PanelSeries& panel, const std::string& event,
                                     const std::vector<EventWindow>& occ, const pipeline::MethodEffects& m) {
    std::ostringstream os;
    os << "event,year,k,delta_hat\n";
    for (std::size_t o = 0; o < occ.size(); ++o) {
        const auto e = m.panel_effect(o);
        for (std::size_t k = 0; k < e.size(); ++k)
            os << event << ',' << pipeline::occurrence_year(panel, occ[o], o) << ',' << k + 1 << ','
               << format_real(e[k]) << '\n';
    }
    return os.str();
}

inline pipeline::MethodEffects method_effects(
    const PanelSeries& panel, const std::vector<EventWindow>& occ,
    const std::function<std::vector<forecast::SyntheticControlSeries>(const EventWindow&)>& controls) {
    return pipeline::internal::effects_from_controls(panel, occ, controls);
}

/// Cross-series mean of a panel as a one-row series.
inline std::vector<double> mean_series(const PanelSeries& p) {
    std::vector<double> m(p.length(), 0.0);
    for (std::size_t i = 0; i < p.n_series(); ++i)
        for (std::size_t t = 0; t < p.length(); ++t) m[t] += p(i, t);
    for (auto& v : m) v /= static_cast<double>(p.n_series());
    return m;
}

}  // namespace internal

/// Parses argv, dispatches one subcommand and returns the process exit code.
/// Files are only written inside --out.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    using namespace internal;
    CLI::App app{"Rare-event treatment effects in panel time series with always-missing controls"};
    app.require_subcommand(1, 1);
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string panel_path;

    auto add_common = [&](CLI::App* c, bool needs_panel) {
        c->add_option("--seed", seed, "Seed for every random draw");
        c->add_option("--out", out_dir, "Output directory")->required();
        if (needs_panel) c->add_option("--panel", panel_path, "Panel CSV (series_id,date,value)")->required();
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate an AR(1) panel or a synthetic holiday panel");
    std::string sim_kind = "ar1", init = "stationary", start_date = "2011-01-29";
    double phi = 0.5, sigma = 1.0, y0 = 0.0;
    std::size_t n = 100, horizon = 200, sim_t0 = 0, sim_d = 0, years = 4;
    std::vector<double> delta;
    add_common(sim, false);
    sim->add_option("--kind", sim_kind)->check(CLI::IsMember({"ar1", "holiday"}));
    sim->add_option("--phi", phi);
    sim->add_option("--sigma", sigma);
    sim->add_option("--init", init)->check(CLI::IsMember({"stationary", "fixed"}));
    sim->add_option("--y0", y0, "Initial value for --init fixed");
    sim->add_option("--n", n, "Number of series")->check(CLI::PositiveNumber);
    sim->add_option("--T", horizon, "Last time index T")->check(CLI::PositiveNumber);
    sim->add_option("--t0", sim_t0);
    sim->add_option("--d", sim_d);
    sim->add_option("--delta", delta)->delimiter(',');
    sim->add_option("--start-date", start_date);
    sim->add_option("--years", years, "Years of data for --kind holiday")->check(CLI::PositiveNumber);

    // fit-ar / estimate
    auto* fit_ar = app.add_subcommand("fit-ar", "Fit AR(1) by pooled OLS on pre-event data");
    WindowFlags fit_window;
    add_common(fit_ar, true);
    fit_window.add(*fit_ar);

    auto* estimate = app.add_subcommand("estimate", "AR(1) counterfactual treatment-effect estimate with CIs");
    WindowFlags est_window;
    double level = 0.95;
    std::string variance = "finite";
    add_common(estimate, true);
    est_window.add(*estimate);
    estimate->add_option("--level", level, "Confidence level");
    estimate->add_option("--variance", variance)->check(CLI::IsMember({"finite", "asymptotic"}));

    // mc-validate / rate-check
    auto* mcv = app.add_subcommand("mc-validate", "Monte Carlo validation of the AR(1) effect estimator");
    std::size_t mc_n = 5000, mc_t0 = 100, mc_d = 3, reps = 2000, threads = 1;
    std::vector<double> mc_delta{2, -1, 0.5};
    std::string standardization = "oracle";
    add_common(mcv, false);
    mcv->add_option("--phi", phi);
    mcv->add_option("--sigma", sigma);
    mcv->add_option("--n", mc_n)->check(CLI::PositiveNumber);
    mcv->add_option("--t0", mc_t0)->check(CLI::PositiveNumber);
    mcv->add_option("--d", mc_d)->check(CLI::PositiveNumber);
    mcv->add_option("--delta", mc_delta)->delimiter(',');
    mcv->add_option("--reps", reps)->check(CLI::PositiveNumber);
    mcv->add_option("--level", level);
    mcv->add_option("--variance", variance)->check(CLI::IsMember({"finite", "asymptotic"}));
    mcv->add_option("--standardization", standardization)->check(CLI::IsMember({"oracle", "estimated"}));
    mcv->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

    auto* rate = app.add_subcommand("rate-check", "Empirical N^{-1/2} rate of the OLS estimate of phi");
    std::vector<std::size_t> n_grid{250, 1000};
    std::size_t rate_t0 = 50;
    add_common(rate, false);
    rate->add_option("--phi", phi);
    rate->add_option("--sigma", sigma);
    rate->add_option("--t0", rate_t0)->check(CLI::PositiveNumber);
    rate->add_option("--n-grid", n_grid)->delimiter(',');
    rate->add_option("--reps", reps)->check(CLI::PositiveNumber);
    rate->add_option("--threads", threads)->check(CLI::PositiveNumber);

    // train / extract / baselines / impact / evaluate
    std::string calendar_path, model_path, event, effects_path, series = "mean";
    TrainFlags tf;
    auto* train = app.add_subcommand("train", "Train the forecaster under the temporal adaptive loss");
    add_common(train, true);
    train->add_option("--calendar", calendar_path)->required();
    tf.add(*train, true);

    auto* extract = app.add_subcommand("extract", "In-sample synthetic control and event effects from a model");
    std::size_t ex_stride = 1;
    std::string ex_aggregation = "mean";
    add_common(extract, true);
    extract->add_option("--calendar", calendar_path)->required();
    extract->add_option("--model", model_path)->required();
    extract->add_option("--event", event);
    extract->add_option("--stride", ex_stride)->check(CLI::PositiveNumber);
    extract->add_option("--aggregation", ex_aggregation)->check(CLI::IsMember({"mean", "median"}));

    auto* bdf = app.add_subcommand("baseline-df", "Direct out-of-sample forecast baseline");
    add_common(bdf, true);
    bdf->add_option("--calendar", calendar_path)->required();
    bdf->add_option("--event", event);
    tf.add(*bdf, false);

    auto* bsd = app.add_subcommand("baseline-sd", "Seasonal decomposition baseline");
    std::vector<std::size_t> periods{7, 365};
    add_common(bsd, true);
    bsd->add_option("--calendar", calendar_path)->required();
    bsd->add_option("--event", event);
    bsd->add_option("--periods", periods)->delimiter(',');

    auto* imp = app.add_subcommand("impact", "Impact-ratio model and next-year effect prediction");
    int target_year = 0;
    std::string scale_mode = "pre_event_month", averaging = "mean";
    add_common(imp, true);
    imp->add_option("--calendar", calendar_path)->required();
    imp->add_option("--event", event)->required();
    imp->add_option("--effects", effects_path, "Effects CSV (event,year,k,delta_hat)")->required();
    imp->add_option("--series", series, "Series id, or 'mean' for the cross-series mean");
    imp->add_option("--target-year", target_year)->required();
    imp->add_option("--scale-mode", scale_mode)->check(CLI::IsMember({"pre_event_month", "calendar_month"}));
    imp->add_option("--averaging", averaging)->check(CLI::IsMember({"mean", "median"}));

    auto* evaluate = app.add_subcommand("evaluate", "Holiday forecast MAPE of SD, DF and the adaptive-loss method");
    std::vector<std::string> events;
    add_common(evaluate, true);
    evaluate->add_option("--calendar", calendar_path)->required();
    evaluate->add_option("--events", events)->delimiter(',');
    evaluate->add_option("--periods", periods)->delimiter(',');
    evaluate->add_option("--scale-mode", scale_mode)->check(CLI::IsMember({"pre_event_month", "calendar_month"}));
    tf.add(*evaluate, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsageError;
    }

    try {
        auto load_panel = [&] { return io::load_panel_csv(panel_path); };
        auto pick_event = [&](const EventCalendar& cal) -> const EventCalendar::Event& {
            detail::require(!cal.empty(), "calendar has no events");
            return event.empty() ? cal.events().front() : cal.event(event);
        };

        if (*sim) {
            report::OutputDir dir(out_dir);
            if (sim_kind == "holiday") {
                synthetic::HolidayPanelSpec spec;
                if (sim->count("--n")) spec.n_series = n;
                if (sim->count("--years")) spec.years = years;
                if (sim->count("--start-date")) spec.start_date = start_date;
                spec.seed = seed;
                const auto hp = synthetic::simulate_holiday_panel(spec);
                io::write_panel_csv(dir.path("panel.csv"), hp.panel);
                dir.record("panel.csv");
                io::write_calendar_csv(dir.path("calendar.csv"), hp.calendar, hp.panel);
                dir.record("calendar.csv");
                std::ostringstream te;
                te << "event,year,series_id,k,delta\n";
                const auto& occ = hp.calendar.event(spec.event_name).occurrences;
                for (std::size_t o = 0; o < occ.size(); ++o)
                    for (std::size_t i = 0; i < hp.panel.n_series(); ++i)
                        for (std::size_t k = 0; k < occ[o].d; ++k)
                            te << spec.event_name << ',' << pipeline::occurrence_year(hp.panel, occ[o], o) << ','
                               << hp.panel.series_ids()[i] << ',' << k + 1 << ','
                               << format_real(hp.true_effect[o](i, k)) << '\n';
                dir.write("true_effects.csv", te.str());
                out << "simulate: holiday panel " << hp.panel.n_series() << " x " << hp.panel.length()
                    << " written to " << dir.path("panel.csv") << "\n";
                return kOk;
            }
            const ARProcessSpec spec(phi, sigma, init == "fixed" ? InitialState::fixed(y0) : InitialState::stationary());
            auto p = simulate_ar1_panel(spec, n, horizon, seed);
            if (sim_t0 > 0 || sim_d > 0 || !delta.empty()) {
                const EventWindow w(sim_t0, sim_d);
                p = inject_treatment(p, w, EffectVector(delta));
            }
            const std::int64_t start = dates::parse_iso(start_date);
            std::vector<std::int64_t> idx(p.length());
            for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = start + static_cast<std::int64_t>(t);
            std::vector<std::string> ids;
            const std::size_t width = std::to_string(n).size();
            for (std::size_t i = 0; i < n; ++i) {
                std::string s = std::to_string(i + 1);
                ids.push_back("s" + std::string(width - s.size(), '0') + s);
            }
            const PanelSeries dated(p.values(), std::move(idx), TimeKind::date, std::move(ids));
            io::write_panel_csv(dir.path("panel.csv"), dated);
            dir.record("panel.csv");
            if (sim_d > 0) {
                EventCalendar cal;
                cal.add("event", EventWindow(sim_t0, sim_d));
                io::write_calendar_csv(dir.path("calendar.csv"), cal, dated);
                dir.record("calendar.csv");
            }
            out << "simulate: AR(1) panel " << n << " x " << horizon + 1 << " written to "
                << dir.path("panel.csv") << "\n";
            return kOk;
        }

        if (*fit_ar) {
            const auto p = load_panel();
            const auto w = fit_window.resolve(p);
            report::OutputDir dir(out_dir);
            const auto fit = fit_ar1_ols(p, w.t0);
            dir.write("ar_fit.csv", report::ar_fit_csv(fit));
            out << "fit-ar: phi_hat=" << format_real(fit.phi_hat) << " sigma2_hat=" << format_real(fit.sigma2_hat)
                << " pairs=" << fit.n_pairs << "\n";
            return kOk;
        }

        if (*estimate) {
            const auto p = load_panel();
            const auto w = est_window.resolve(p);
            report::OutputDir dir(out_dir);
            ARModelFit fit;
            const auto mode = variance == "finite" ? VarianceMode::finite_horizon : VarianceMode::asymptotic_diagonal;
            const auto est = estimate_ar1_effect(p, w, mode, &fit);
            const auto ci = confidence_intervals(est, est.covariance, level);
            dir.write("effect_estimate.csv", report::effect_csv(est, ci));
            dir.write("ar_fit.csv", report::ar_fit_csv(fit));
            const auto cf = forecast_counterfactual(fit, p, w);
            const auto mean_y = mean_series(p);
            forecast::SyntheticControlSeries synth;
            synth.values.assign(p.length(), 0.0);
            synth.overlap_counts.assign(p.length(), 0);
            synth.values[w.t0] = mean_y[w.t0];
            synth.overlap_counts[w.t0] = 1;
            for (std::size_t k = 0; k < w.d; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.n_series(); ++i) s += cf.values(i, k);
                synth.values[w.first() + k] = s / static_cast<double>(p.n_series());
                synth.overlap_counts[w.first() + k] = 1;
            }
            dir.write("effect.svg", report::synthetic_control_svg(mean_y, synth, w, "Cross-series mean vs AR(1) counterfactual"));
            out << "estimate: d=" << w.d << " delta_hat[1]=" << format_real(est.delta_hat[0]) << " written to "
                << dir.path("effect_estimate.csv") << "\n";
            return kOk;
        }

        if (*mcv) {
            mc::MCConfig cfg;
            cfg.spec = ARProcessSpec(phi, sigma);
            cfg.n_series = mc_n;
            cfg.window = EventWindow(mc_t0, mc_d);
            cfg.delta = EffectVector(mc_delta);
            cfg.replications = reps;
            cfg.master_seed = seed;
            cfg.ci_level = level;
            cfg.ci_variance = variance == "finite" ? VarianceMode::finite_horizon : VarianceMode::asymptotic_diagonal;
            cfg.standardization = standardization == "oracle" ? mc::Standardization::oracle : mc::Standardization::estimated;
            cfg.threads = threads;
            cfg.validate();
            report::OutputDir dir(out_dir);
            const auto rep = mc::run_replications(cfg);
            dir.write("mc_report.csv", report::mc_component_csv(rep));
            dir.write("mc_cross_cov.csv", report::mc_cross_cov_csv(rep));
            dir.write("mc_summary.csv", report::mc_summary_csv(rep));
            std::vector<double> z0(rep.replications);
            for (std::size_t r = 0; r < rep.replications; ++r) z0[r] = rep.standardized(r, 0);
            dir.write("mc_report.svg", report::standardized_histogram_svg(z0, "Standardized delta_hat, first window day"));
            out << "mc-validate: " << rep.replications << " replications, var[1]="
                << format_real(rep.per_component[0].empirical_var_scaled) << " (finite-horizon "
                << format_real(rep.per_component[0].theoretical_var_finite) << "), coverage[1]="
                << format_real(rep.per_component[0].ci_coverage)
                << (rep.offdiagonal_nonzero ? "; off-diagonal covariance nonzero: diagonal Sigma rejected"
                                            : "; off-diagonal covariance consistent with zero")
                << "\n";
            return kOk;
        }

        if (*rate) {
            report::OutputDir dir(out_dir);
            const auto rr = mc::rate_check_phi(ARProcessSpec(phi, sigma), rate_t0, n_grid, reps, seed, threads);
            dir.write("rate_report.csv", report::rate_csv(rr));
            out << "rate-check: sd ratio " << format_real(rr.sd_ratios.front()) << " (expected "
                << format_real(rr.expected_ratios.front()) << ")\n";
            return kOk;
        }

        if (*train) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            const auto cfg = tf.config(seed);
            report::OutputDir dir(out_dir);
            const auto samples = forecast::build_panel_windows(p, cfg.windows, cal);
            const auto model = forecast::train(samples, cfg.arch, cfg.loss, cfg.train);
            forecast::save_model(dir.path("model.txt"), model);
            dir.record("model.txt");
            std::ostringstream hist;
            hist << "epoch,loss\n";
            for (std::size_t e = 0; e < model.epoch_loss.size(); ++e)
                hist << e + 1 << ',' << format_real(model.epoch_loss[e]) << '\n';
            dir.write("training_loss.csv", hist.str());
            out << "train: " << samples.size() << " samples, final epoch loss "
                << format_real(model.epoch_loss.back()) << ", model written to " << dir.path("model.txt") << "\n";
            return kOk;
        }

        if (*extract) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            const auto model = forecast::load_model(model_path);
            detail::require(model.normalization().size() == p.n_series(),
                            "model was trained on " + std::to_string(model.normalization().size()) +
                                " series, panel has " + std::to_string(p.n_series()));
            const forecast::RollingWindowConfig rw{model.lookback(), model.horizon(), ex_stride};
            const auto agg = ex_aggregation == "mean" ? forecast::OverlapAggregation::mean
                                                      : forecast::OverlapAggregation::median;
            report::OutputDir dir(out_dir);
            std::vector<forecast::SyntheticControlSeries> controls;
            for (std::size_t i = 0; i < p.n_series(); ++i)
                controls.push_back(forecast::insample_forecast(model, p.series(i), rw, i, agg));
            const auto& ev = pick_event(cal);
            const auto m = method_effects(p, ev.occurrences, [&](const EventWindow&) { return controls; });
            dir.write("effects.csv", effects_csv(p, ev.name, ev.occurrences, m));
            dir.write("panel_effects.csv", panel_effects_csv(p, ev.name, ev.occurrences, m));
            std::ostringstream sc;
            sc << "series_id,date,observed,synthetic,overlap_count\n";
            for (std::size_t i = 0; i < p.n_series(); ++i)
                for (std::size_t t = 0; t < p.length(); ++t)
                    if (controls[i].covers(t))
                        sc << p.series_ids()[i] << ',' << io::time_label(p, t) << ',' << format_real(p(i, t)) << ','
                           << format_real(controls[i].values[t]) << ',' << controls[i].overlap_counts[t] << '\n';
            dir.write("synthetic_control.csv", sc.str());
            for (std::size_t o = 0; o < ev.occurrences.size(); ++o)
                dir.write("synthetic_control_" + ev.name + "_" +
                              std::to_string(pipeline::occurrence_year(p, ev.occurrences[o], o)) + ".svg",
                          report::synthetic_control_svg(p.series(0), controls[0], ev.occurrences[o],
                                                        p.series_ids()[0] + " / " + ev.name));
            out << "extract: " << ev.occurrences.size() << " occurrences of '" << ev.name << "' written to "
                << dir.path("effects.csv") << "\n";
            return kOk;
        }

        if (*bdf) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            const auto cfg = tf.config(seed);
            const auto& ev = pick_event(cal);
            report::OutputDir dir(out_dir);
            const auto m = method_effects(p, ev.occurrences, [&](const EventWindow& w) {
                return baselines::direct_forecast_panel(p, w, cfg.direct());
            });
            dir.write("df_effects.csv", effects_csv(p, ev.name, ev.occurrences, m));
            dir.write("df_panel_effects.csv", panel_effects_csv(p, ev.name, ev.occurrences, m));
            out << "baseline-df: " << ev.occurrences.size() << " occurrences of '" << ev.name << "' written to "
                << dir.path("df_effects.csv") << "\n";
            return kOk;
        }

        if (*bsd) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            const auto& ev = pick_event(cal);
            report::OutputDir dir(out_dir);
            const auto m = method_effects(p, ev.occurrences, [&](const EventWindow& w) {
                std::vector<forecast::SyntheticControlSeries> c;
                for (std::size_t i = 0; i < p.n_series(); ++i)
                    c.push_back(baselines::seasonal_decompose(p.series(i), periods, w).control);
                return c;
            });
            dir.write("sd_effects.csv", effects_csv(p, ev.name, ev.occurrences, m));
            dir.write("sd_panel_effects.csv", panel_effects_csv(p, ev.name, ev.occurrences, m));
            std::ostringstream dec;
            dec << "series_id,date,trend";
            auto sorted = periods;
            std::sort(sorted.begin(), sorted.end());
            for (auto per : sorted) dec << ",seasonal_" << per;
            dec << ",remainder\n";
            for (std::size_t i = 0; i < p.n_series(); ++i) {
                const auto sd = baselines::seasonal_decompose(p.series(i), periods, ev.occurrences.front());
                const auto& r = sd.decomposition;
                for (std::size_t t = 0; t < p.length(); ++t) {
                    dec << p.series_ids()[i] << ',' << io::time_label(p, t) << ',' << format_real(r.trend[t]);
                    for (const auto& [per, s] : r.seasonal_components) dec << ',' << format_real(s[t]);
                    dec << ',' << format_real(r.remainder[t]) << '\n';
                }
            }
            dir.write("sd_decomposition.csv", dec.str());
            out << "baseline-sd: " << ev.occurrences.size() << " occurrences of '" << ev.name << "' written to "
                << dir.path("sd_effects.csv") << "\n";
            return kOk;
        }

        if (*imp) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            const auto& ev = cal.event(event);
            std::vector<double> y;
            if (series == "mean") {
                y = mean_series(p);
            } else {
                const auto it = std::find(p.series_ids().begin(), p.series_ids().end(), series);
                detail::require(it != p.series_ids().end(), "unknown series '" + series + "'");
                const auto row = p.series(static_cast<std::size_t>(it - p.series_ids().begin()));
                y.assign(row.begin(), row.end());
            }
            const auto mode = scale_mode == "pre_event_month" ? impact::ScaleMode::pre_event_month
                                                             : impact::ScaleMode::calendar_month;
            std::map<int, std::map<std::size_t, double>> eff;
            io::internal::read_csv(effects_path, {"event", "year", "k", "delta_hat"},
                                   [&](std::size_t line, const std::vector<std::string>& f) {
                                       if (f[0] != event) return;
                                       const std::string where = effects_path + ":" + std::to_string(line);
                                       eff[static_cast<int>(io::internal::parse_double(f[1], where))]
                                          [static_cast<std::size_t>(io::internal::parse_double(f[2], where))] =
                                              io::internal::parse_double(f[3], where);
                                   });
            std::map<int, EventWindow> by_year;
            for (std::size_t o = 0; o < ev.occurrences.size(); ++o)
                by_year[pipeline::occurrence_year(p, ev.occurrences[o], o)] = ev.occurrences[o];
            detail::require(by_year.contains(target_year),
                            "target year " + std::to_string(target_year) + " has no occurrence of '" + event + "'");
            impact::ImpactRatioModel model(event);
            for (const auto& [year, ks] : eff) {
                if (year == target_year) continue;
                detail::require(by_year.contains(year), "effects file year " + std::to_string(year) +
                                                            " has no occurrence in the calendar");
                TreatmentEffectEstimate est;
                est.window = by_year[year];
                for (const auto& [k, v] : ks) est.delta_hat.push_back(v);
                const double c = impact::year_scale(y, p.time_index(), p.time_kind(), est.window, cal, mode);
                model.add_year(year, est, c);
            }
            detail::require(!model.empty(), "no training years in the effects file");
            const auto& tw = by_year[target_year];
            const double c_target = impact::year_scale(y, p.time_index(), p.time_kind(), tw, cal, mode);
            const auto pred = impact::predict_effect(
                model, c_target, averaging == "mean" ? impact::RatioAveraging::mean : impact::RatioAveraging::median);
            report::OutputDir dir(out_dir);
            dir.write("ratio_model.csv", report::ratio_model_csv(model));
            std::ostringstream pe;
            pe << "k,date,scale,predicted_effect\n";
            for (std::size_t k = 0; k < pred.size() && k < tw.d; ++k)
                pe << k + 1 << ',' << io::time_label(p, tw.first() + k) << ',' << format_real(c_target) << ','
                   << format_real(pred[k]) << '\n';
            dir.write("predicted_effect.csv", pe.str());
            out << "impact: " << model.per_year().size() << " training years, target scale "
                << format_real(c_target) << ", written to " << dir.path("predicted_effect.csv") << "\n";
            return kOk;
        }

        if (*evaluate) {
            const auto p = load_panel();
            const auto cal = load_bound_calendar(calendar_path, p);
            auto cfg = tf.config(seed);
            cfg.sd_periods = periods;
            cfg.scale_mode = scale_mode == "pre_event_month" ? impact::ScaleMode::pre_event_month
                                                            : impact::ScaleMode::calendar_month;
            if (events.empty())
                for (const auto& e : cal.events()) events.push_back(e.name);
            report::OutputDir dir(out_dir);
            const auto fit = pipeline::fit_insample(p, cal, cfg);
            std::vector<pipeline::EvaluationRow> rows;
            for (const auto& e : events) {
                const auto ev = pipeline::evaluate_event(p, cal, e, cfg, fit);
                rows.insert(rows.end(), ev.rows.begin(), ev.rows.end());
                dir.write("effects_ours_" + e + ".csv", panel_effects_csv(p, e, ev.occurrences, ev.ours));
                dir.write("effects_df_" + e + ".csv", panel_effects_csv(p, e, ev.occurrences, ev.df));
                dir.write("effects_sd_" + e + ".csv", panel_effects_csv(p, e, ev.occurrences, ev.sd));
                dir.write("synthetic_control_" + e + ".svg",
                          report::synthetic_control_svg(p.series(0), fit.controls[0], ev.occurrences.back(),
                                                        p.series_ids()[0] + " / " + e));
            }
            dir.write("mape_table.csv", report::mape_table_csv(rows));
            double sd = 0, df = 0, ours = 0;
            for (const auto& r : rows) {
                sd += r.mape_sd;
                df += r.mape_df;
                ours += r.mape_ours;
            }
            const double nr = static_cast<double>(rows.size());
            out << "evaluate: mean MAPE SD=" << format_real(sd / nr) << " DF=" << format_real(df / nr)
                << " ours=" << format_real(ours / nr) << ", table written to " << dir.path("mape_table.csv") << "\n";
            return kOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.is_validation() ? kUsageError : kRuntimeError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace rarefx::cli
