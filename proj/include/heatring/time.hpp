#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "heatring/error.hpp"

namespace heatring {

/// A calendar month as a linear index (year * 12 + month - 1), so that month
/// arithmetic is plain integer arithmetic.
struct Month {
    int index = 0;

    static constexpr Month from_ym(int year, int month) { return Month{year * 12 + (month - 1)}; }

    constexpr int year() const { return index >= 0 ? index / 12 : -((-index + 11) / 12); }
    /// 1..12
    constexpr int calendar_month() const { return index - year() * 12 + 1; }

    std::string label() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02d", year(), calendar_month());
        return buf;
    }

    constexpr Month operator+(int months) const { return Month{index + months}; }
    constexpr Month operator-(int months) const { return Month{index - months}; }
    constexpr int operator-(Month other) const { return index - other.index; }
    constexpr auto operator<=>(const Month&) const = default;
};

namespace detail {

inline bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

} // namespace detail

/// Parses "YYYY-MM".
inline Month parse_month(std::string_view s) {
    int y = 0, m = 0;
    if (s.size() != 7 || s[4] != '-' || !detail::parse_fixed_int(s.substr(0, 4), y) ||
        !detail::parse_fixed_int(s.substr(5, 2), m) || m < 1 || m > 12)
        throw Error(ErrorCode::bad_date, "invalid month label '" + std::string(s) + "' (expected YYYY-MM)");
    return Month::from_ym(y, m);
}

/// Parses "YYYY-MM-DD".
inline std::chrono::year_month_day parse_day(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_fixed_int(s.substr(0, 4), y) ||
        !detail::parse_fixed_int(s.substr(5, 2), m) || !detail::parse_fixed_int(s.substr(8, 2), d))
        throw Error(ErrorCode::bad_date, "invalid day label '" + std::string(s) + "' (expected YYYY-MM-DD)");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw Error(ErrorCode::bad_date, "invalid calendar day '" + std::string(s) + "'");
    return ymd;
}

inline std::string day_label(std::chrono::year_month_day ymd) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline Month month_of(std::chrono::year_month_day ymd) {
    return Month::from_ym(static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())));
}

enum class Cadence { monthly, daily };

inline std::string_view to_string(Cadence c) { return c == Cadence::monthly ? "monthly" : "daily"; }

inline Cadence parse_cadence(std::string_view s) {
    if (s == "monthly") return Cadence::monthly;
    if (s == "daily") return Cadence::daily;
    throw Error(ErrorCode::validation, "cadence must be \"monthly\" or \"daily\", got '" + std::string(s) + "'");
}

/// Month that a period label falls in, for either cadence.
inline Month period_month(std::string_view label, Cadence cadence) {
    return cadence == Cadence::monthly ? parse_month(label) : month_of(parse_day(label));
}

} // namespace heatring
