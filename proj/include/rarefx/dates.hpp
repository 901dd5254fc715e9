#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>

#include "rarefx/error.hpp"

namespace rarefx::dates {

/// Days since 1970-01-01 of a strict YYYY-MM-DD string.
inline std::int64_t parse_iso(const std::string& s) {
    using namespace std::chrono;
    auto digit = [&](std::size_t i) { return s[i] >= '0' && s[i] <= '9'; };
    bool ok = s.size() == 10 && s[4] == '-' && s[7] == '-';
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) ok = ok && digit(i);
    if (!ok) throw DataError("invalid ISO-8601 date '" + s + "'");
    const year_month_day ymd{year{std::stoi(s.substr(0, 4))},
                             month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                             day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + s + "'");
    return sys_days{ymd}.time_since_epoch().count();
}

inline std::chrono::year_month_day to_ymd(std::int64_t days) {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

inline std::string format_iso(std::int64_t days) {
    const auto ymd = to_ymd(days);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline int year_of(std::int64_t days) { return static_cast<int>(to_ymd(days).year()); }

/// [first, last] day numbers of the calendar month containing `days`.
inline std::pair<std::int64_t, std::int64_t> month_range(std::int64_t days) {
    using namespace std::chrono;
    const auto ymd = to_ymd(days);
    const sys_days first{ymd.year() / ymd.month() / 1};
    const sys_days last{ymd.year() / ymd.month() / std::chrono::last};
    return {first.time_since_epoch().count(), last.time_since_epoch().count()};
}

}  // namespace rarefx::dates
