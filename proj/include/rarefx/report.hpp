#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rarefx/ar_inference.hpp"
#include "rarefx/error.hpp"
#include "rarefx/impact.hpp"
#include "rarefx/io.hpp"
#include "rarefx/montecarlo.hpp"
#include "rarefx/pipeline.hpp"
#include "rarefx/stats.hpp"

namespace rarefx::report {

using io::format_real;

/// Collects written files; every path is resolved inside `dir`.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw IoError("cannot create output directory '" + dir_.string() + "'");
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& content) {
        const auto p = path(name);
        std::ofstream os(p, std::ios::binary);
        if (!os) throw IoError("cannot write '" + p + "'");
        os << content;
        if (!os) throw IoError("failed writing '" + p + "'");
        written_.push_back(p);
    }

    void record(const std::string& name) { written_.push_back(path(name)); }
    const std::vector<std::string>& written() const noexcept { return written_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> written_;
};

// ---- CSV ---------------------------------------------------------------

/// k,delta_hat,lower,upper (k counts window days from 1).
inline std::string effect_csv(const TreatmentEffectEstimate& est, const std::vector<Interval>& ci) {
    std::ostringstream os;
    os << "k,delta_hat,lower,upper\n";
    for (std::size_t k = 0; k < est.delta_hat.size(); ++k) {
        os << k + 1 << ',' << format_real(est.delta_hat[k]) << ',';
        if (k < ci.size()) os << format_real(ci[k].lower) << ',' << format_real(ci[k].upper);
        else os << ',';
        os << '\n';
    }
    return os.str();
}

inline std::string ar_fit_csv(const ARModelFit& fit) {
    std::ostringstream os;
    os << "phi_hat,sigma2_hat,n_pairs\n"
       << format_real(fit.phi_hat) << ',' << format_real(fit.sigma2_hat) << ',' << fit.n_pairs << '\n';
    return os.str();
}

inline std::string mc_component_csv(const mc::MonteCarloReport& r) {
    std::ostringstream os;
    os << "k,mean_bias,empirical_var_scaled,theoretical_var_finite,theoretical_var_asymptotic,"
          "ci_coverage,skewness,excess_kurtosis\n";
    for (std::size_t k = 0; k < r.per_component.size(); ++k) {
        const auto& c = r.per_component[k];
        os << k + 1 << ',' << format_real(c.mean_bias) << ',' << format_real(c.empirical_var_scaled) << ','
           << format_real(c.theoretical_var_finite) << ',' << format_real(c.theoretical_var_asymptotic)
           << ',' << format_real(c.ci_coverage) << ',' << format_real(c.skewness) << ','
           << format_real(c.excess_kurtosis) << '\n';
    }
    return os.str();
}

/// k,l,empirical,ma_oracle,diagonal_claim,stderr: the empirical covariance of
/// sqrt(N)(delta_hat - delta) next to the MA(inf) oracle and the diagonal
/// limiting covariance sigma^2/(1-phi^2) I.
inline std::string mc_cross_cov_csv(const mc::MonteCarloReport& r) {
    std::ostringstream os;
    os << "k,l,empirical,ma_oracle,diagonal_claim,stderr\n";
    const std::size_t d = r.cross_cov_scaled.rows();
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
            const double diag = k == l ? r.per_component[k].theoretical_var_asymptotic : 0.0;
            os << k + 1 << ',' << l + 1 << ',' << format_real(r.cross_cov_scaled(k, l)) << ','
               << format_real(r.cross_cov_oracle(k, l)) << ',' << format_real(diag) << ','
               << format_real(r.cross_cov_stderr(k, l)) << '\n';
        }
    return os.str();
}

inline std::string mc_summary_csv(const mc::MonteCarloReport& r) {
    std::ostringstream os;
    os << "key,value\n"
       << "replications," << r.replications << '\n'
       << "n_series," << r.n_series << '\n'
       << "ci_level," << format_real(r.ci_level) << '\n'
       << "ci_variance," << to_string(r.ci_variance) << '\n'
       << "phi_hat_mean," << format_real(r.phi_hat_mean) << '\n'
       << "phi_hat_sd," << format_real(r.phi_hat_sd) << '\n'
       << "max_offdiagonal_z," << format_real(r.max_offdiagonal_z) << '\n'
       << "offdiagonal_nonzero," << (r.offdiagonal_nonzero ? "true" : "false") << '\n';
    return os.str();
}

inline std::string rate_csv(const mc::RateReport& r) {
    std::ostringstream os;
    os << "n_series,phi_hat_mean,phi_hat_sd,sd_ratio_to_next,expected_ratio\n";
    for (std::size_t j = 0; j < r.rows.size(); ++j) {
        os << r.rows[j].n_series << ',' << format_real(r.rows[j].phi_hat_mean) << ','
           << format_real(r.rows[j].phi_hat_sd) << ',';
        if (j < r.sd_ratios.size())
            os << format_real(r.sd_ratios[j]) << ',' << format_real(r.expected_ratios[j]);
        else
            os << ',';
        os << '\n';
    }
    return os.str();
}

/// department,event,SD,DF,ours (MAPE in percent).
inline std::string mape_table_csv(const std::vector<pipeline::EvaluationRow>& rows) {
    std::ostringstream os;
    os << "department,event,SD,DF,ours\n";
    for (const auto& r : rows)
        os << r.series_id << ',' << r.event << ',' << format_real(r.mape_sd) << ','
           << format_real(r.mape_df) << ',' << format_real(r.mape_ours) << '\n';
    return os.str();
}

/// event,year,k,ratio,scale.
inline std::string ratio_model_csv(const impact::ImpactRatioModel& m) {
    std::ostringstream os;
    os << "event,year,k,ratio,scale\n";
    for (const auto& [year, e] : m.per_year())
        for (std::size_t k = 0; k < e.ratio.size(); ++k)
            os << m.event_name() << ',' << year << ',' << k + 1 << ',' << format_real(e.ratio[k]) << ','
               << format_real(e.scale) << '\n';
    return os.str();
}

/// Inverse of ratio_model_csv.
inline impact::ImpactRatioModel read_ratio_model_csv(const std::string& path) {
    std::map<int, std::map<std::size_t, double>> ratios;
    std::map<int, double> scales;
    std::string event;
    io::internal::read_csv(path, {"event", "year", "k", "ratio", "scale"},
                           [&](std::size_t line, const std::vector<std::string>& f) {
                               const std::string where = path + ":" + std::to_string(line);
                               if (event.empty()) event = f[0];
                               if (f[0] != event) throw DataError(where + ": mixed events in ratio file");
                               const int year = static_cast<int>(io::internal::parse_double(f[1], where));
                               const auto k = static_cast<std::size_t>(io::internal::parse_double(f[2], where));
                               ratios[year][k] = io::internal::parse_double(f[3], where);
                               scales[year] = io::internal::parse_double(f[4], where);
                           });
    impact::ImpactRatioModel m(event);
    for (const auto& [year, r] : ratios) {
        std::vector<double> v;
        for (const auto& [k, x] : r) v.push_back(x);
        m.add_year(year, std::move(v), scales[year]);
    }
    return m;
}

// ---- SVG ---------------------------------------------------------------

namespace internal {

struct Frame {
    double x0, x1, y0, y1;
    double width = 800, height = 360, margin = 50;
    double sx(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
    double sy(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }
};

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '&': o += "&amp;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& colour, double width = 1.2) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << width << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << (i ? " " : "") << fmt(f.sx(xs[i])) << ',' << fmt(f.sy(ys[i]));
    os << "\"/>\n";
    return os.str();
}

inline std::string header(const Frame& f, const std::string& title) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
       << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << f.margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
       << xml_escape(title) << "</text>\n"
       << "<line x1=\"" << f.margin << "\" y1=\"" << f.height - f.margin << "\" x2=\"" << f.width - f.margin
       << "\" y2=\"" << f.height - f.margin << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << f.margin << "\" y1=\"" << f.margin << "\" x2=\"" << f.margin << "\" y2=\""
       << f.height - f.margin << "\" stroke=\"black\"/>\n"
       << "<text x=\"4\" y=\"" << fmt(f.sy(f.y1)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
       << fmt(f.y1) << "</text>\n"
       << "<text x=\"4\" y=\"" << fmt(f.sy(f.y0)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
       << fmt(f.y0) << "</text>\n";
    return os.str();
}

}  // namespace internal

/// Observed series against the synthetic control around an event, with the
/// event window shaded. `context` days are drawn on each side of the window.
inline std::string synthetic_control_svg(std::span<const double> observed,
                                         const forecast::SyntheticControlSeries& synth,
                                         const EventWindow& window, const std::string& title,
                                         std::size_t context = 45) {
    const std::size_t lo = window.first() > context ? window.first() - context : 0;
    const std::size_t hi = std::min(observed.size() - 1, window.last() + context);
    std::vector<double> xs, ys, cx, cy;
    double ymin = INFINITY, ymax = -INFINITY;
    for (std::size_t t = lo; t <= hi; ++t) {
        xs.push_back(static_cast<double>(t));
        ys.push_back(observed[t]);
        ymin = std::min(ymin, observed[t]);
        ymax = std::max(ymax, observed[t]);
        if (synth.covers(t)) {
            cx.push_back(static_cast<double>(t));
            cy.push_back(synth.values[t]);
            ymin = std::min(ymin, synth.values[t]);
            ymax = std::max(ymax, synth.values[t]);
        }
    }
    if (ymax <= ymin) ymax = ymin + 1.0;
    internal::Frame f{static_cast<double>(lo), static_cast<double>(std::max(hi, lo + 1)), ymin, ymax};
    std::ostringstream os;
    os << internal::header(f, title);
    os << "<rect x=\"" << internal::fmt(f.sx(window.first() - 0.5)) << "\" y=\"" << f.margin
       << "\" width=\"" << internal::fmt(f.sx(window.last() + 0.5) - f.sx(window.first() - 0.5))
       << "\" height=\"" << f.height - 2 * f.margin << "\" fill=\"#f4c7c3\" opacity=\"0.6\"/>\n";
    os << internal::polyline(f, xs, ys, "#1f77b4");
    if (!cx.empty()) os << internal::polyline(f, cx, cy, "#d62728", 1.6);
    os << "<text x=\"" << f.width - 220 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"#1f77b4\">observed</text>\n"
       << "<text x=\"" << f.width - 140 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"#d62728\">synthetic control</text>\n"
       << "</svg>\n";
    return os.str();
}

/// Histogram of standardized values with the N(0,1) density overlaid.
inline std::string standardized_histogram_svg(const std::vector<double>& z, const std::string& title,
                                              std::size_t bins = 40) {
    const double lo = -4.0, hi = 4.0, w = (hi - lo) / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    for (double v : z) {
        if (v < lo || v >= hi) continue;
        counts[static_cast<std::size_t>((v - lo) / w)] += 1.0;
    }
    const double n = std::max<double>(1.0, static_cast<double>(z.size()));
    double ymax = 0.41;
    for (auto& c : counts) {
        c /= n * w;
        ymax = std::max(ymax, c);
    }
    internal::Frame f{lo, hi, 0.0, ymax * 1.05};
    std::ostringstream os;
    os << internal::header(f, title);
    for (std::size_t b = 0; b < bins; ++b) {
        const double x0 = lo + w * static_cast<double>(b);
        os << "<rect x=\"" << internal::fmt(f.sx(x0)) << "\" y=\"" << internal::fmt(f.sy(counts[b]))
           << "\" width=\"" << internal::fmt(f.sx(x0 + w) - f.sx(x0)) << "\" height=\""
           << internal::fmt(f.sy(0.0) - f.sy(counts[b])) << "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    }
    std::vector<double> xs, ys;
    for (int i = 0; i <= 200; ++i) {
        const double x = lo + (hi - lo) * i / 200.0;
        xs.push_back(x);
        ys.push_back(std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::acos(-1.0)));
    }
    os << internal::polyline(f, xs, ys, "#d62728", 1.8) << "</svg>\n";
    return os.str();
}

}  // namespace rarefx::report
