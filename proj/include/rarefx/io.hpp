#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rarefx/dates.hpp"
#include "rarefx/error.hpp"
#include "rarefx/panel.hpp"

namespace rarefx::io {

namespace internal {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
        throw DataError(where + ": non-numeric value '" + s + "'");
    return v;
}

/// Reads a CSV file, checks the header and hands (line_number, fields) rows to `row`.
template <class Row>
void read_csv(const std::string& path, const std::vector<std::string>& header, Row&& row) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (!saw_header) {
            if (fields != header) {
                std::string want;
                for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
                throw DataError(path + ": expected header '" + want + "'");
            }
            saw_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        row(lineno, fields);
    }
    if (!saw_header) throw DataError(path + ": empty file");
}

}  // namespace internal

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// Long-format `series_id,date,value` pivoted to an N x (T+1) panel. Series
/// are ordered by id; every series must cover the same gap-free date range.
inline PanelSeries load_panel_csv(const std::string& path) {
    std::map<std::string, std::map<std::int64_t, double>> data;
    internal::read_csv(path, {"series_id", "date", "value"},
                       [&](std::size_t line, const std::vector<std::string>& f) {
                           const std::string where = path + ":" + std::to_string(line);
                           std::int64_t day;
                           try {
                               day = dates::parse_iso(f[1]);
                           } catch (const DataError& e) {
                               throw DataError(where + ": " + e.what());
                           }
                           const double v = internal::parse_double(f[2], where);
                           if (f[0].empty()) throw DataError(where + ": empty series_id");
                           if (!data[f[0]].emplace(day, v).second)
                               throw DataError(where + ": duplicate row for series '" + f[0] +
                                               "' on " + f[1]);
                       });
    if (data.empty()) throw DataError(path + ": no data rows");

    std::int64_t lo = data.begin()->second.begin()->first;
    std::int64_t hi = data.begin()->second.rbegin()->first;
    for (const auto& [id, rows] : data) {
        if (rows.begin()->first != lo || rows.rbegin()->first != hi)
            throw DataError(path + ": inconsistent date ranges: series '" + id + "' spans " +
                            dates::format_iso(rows.begin()->first) + ".." +
                            dates::format_iso(rows.rbegin()->first) + " but '" +
                            data.begin()->first + "' spans " + dates::format_iso(lo) + ".." +
                            dates::format_iso(hi));
    }
    std::string gaps;
    std::size_t n_gaps = 0;
    for (const auto& [id, rows] : data)
        for (std::int64_t d = lo; d <= hi; ++d)
            if (!rows.contains(d)) {
                if (++n_gaps <= 20) gaps += " (" + id + ", " + dates::format_iso(d) + ")";
            }
    if (n_gaps) throw DataError(path + ": missing dates:" + gaps + (n_gaps > 20 ? " ..." : ""));

    const std::size_t T1 = static_cast<std::size_t>(hi - lo + 1);
    Matrix values(data.size(), T1);
    std::vector<std::string> ids;
    std::size_t i = 0;
    for (const auto& [id, rows] : data) {
        ids.push_back(id);
        std::size_t t = 0;
        for (const auto& [day, v] : rows) values(i, t++) = v;
        ++i;
    }
    std::vector<std::int64_t> idx(T1);
    for (std::size_t t = 0; t < T1; ++t) idx[t] = lo + static_cast<std::int64_t>(t);
    return PanelSeries(std::move(values), std::move(idx), TimeKind::date, std::move(ids));
}

inline std::string time_label(const PanelSeries& p, std::size_t t) {
    return p.time_kind() == TimeKind::date ? dates::format_iso(p.time_index()[t])
                                           : std::to_string(p.time_index()[t]);
}

/// Writes the long-format panel CSV (rows ordered by series, then date).
/// Integer-indexed panels are written with dates counted from 1970-01-01.
inline void write_panel_csv(const std::string& path, const PanelSeries& p) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path + "'");
    os << "series_id,date,value\n";
    for (std::size_t i = 0; i < p.n_series(); ++i)
        for (std::size_t t = 0; t < p.length(); ++t)
            os << p.series_ids()[i] << ',' << dates::format_iso(p.time_index()[t]) << ','
               << format_real(p(i, t)) << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

/// Event occurrences as inclusive date ranges, before binding to a panel.
struct DatedEvent {
    std::string name;
    std::int64_t start = 0;
    std::int64_t end = 0;
};

struct DateCalendar {
    std::vector<DatedEvent> rows;  // sorted by (name, start)
};

/// `event,start_date,end_date` rows; occurrences of one event must not overlap.
inline DateCalendar load_calendar(const std::string& path) {
    DateCalendar cal;
    internal::read_csv(path, {"event", "start_date", "end_date"},
                       [&](std::size_t line, const std::vector<std::string>& f) {
                           const std::string where = path + ":" + std::to_string(line);
                           if (f[0].empty()) throw DataError(where + ": empty event name");
                           DatedEvent e{f[0], 0, 0};
                           try {
                               e.start = dates::parse_iso(f[1]);
                               e.end = dates::parse_iso(f[2]);
                           } catch (const DataError& err) {
                               throw DataError(where + ": " + err.what());
                           }
                           if (e.end < e.start)
                               throw ValidationError(where + ": end_date before start_date");
                           cal.rows.push_back(e);
                       });
    std::sort(cal.rows.begin(), cal.rows.end(), [](const DatedEvent& a, const DatedEvent& b) {
        return a.name != b.name ? a.name < b.name : a.start < b.start;
    });
    for (std::size_t j = 1; j < cal.rows.size(); ++j)
        if (cal.rows[j].name == cal.rows[j - 1].name && cal.rows[j].start <= cal.rows[j - 1].end)
            throw ValidationError(path + ": overlapping occurrences of event '" + cal.rows[j].name +
                                  "' (" + dates::format_iso(cal.rows[j - 1].start) + " and " +
                                  dates::format_iso(cal.rows[j].start) + ")");
    return cal;
}

/// Resolves dates against a date-indexed panel: t0 = index(start) - 1,
/// d = inclusive day count.
inline EventCalendar bind_calendar(const DateCalendar& cal, const PanelSeries& panel) {
    detail::require(panel.time_kind() == TimeKind::date, "calendar: panel has no date index");
    const auto& idx = panel.time_index();
    EventCalendar out;
    for (const auto& e : cal.rows) {
        const auto it = std::lower_bound(idx.begin(), idx.end(), e.start);
        detail::require_bounds(it != idx.end() && *it == e.start && it != idx.begin(),
                               "calendar: event '" + e.name + "' start " + dates::format_iso(e.start) +
                                   " must lie inside the panel after its first date");
        const auto t0 = static_cast<std::size_t>(it - idx.begin()) - 1;
        const auto d = static_cast<std::size_t>(e.end - e.start + 1);
        EventWindow w(t0, d);
        w.check_fits(panel);
        out.add(e.name, w);
    }
    return out;
}

inline void write_calendar_csv(const std::string& path, const EventCalendar& cal,
                               const PanelSeries& panel) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path + "'");
    os << "event,start_date,end_date\n";
    for (const auto& e : cal.events())
        for (const auto& w : e.occurrences)
            os << e.name << ',' << time_label(panel, w.first()) << ',' << time_label(panel, w.last())
               << '\n';
}

}  // namespace rarefx::io
