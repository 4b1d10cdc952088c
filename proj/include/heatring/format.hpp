#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

namespace heatring {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_exact(double v) {
    if (v == 0.0) v = 0.0; // drop the sign of -0
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

/// Fixed significant-digit rendering used for every CSV/JSON result value.
inline std::string format_sig(double v, int digits = 9) {
    if (std::isnan(v)) return "NaN";
    if (v == 0.0) v = 0.0;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    std::string s(buf);
    if (s == "-0") s = "0";
    return s;
}

/// Value rounded to `digits` significant digits, for embedding in JSON.
inline double round_sig(double v, int digits = 9) {
    if (!std::isfinite(v)) return v;
    const std::string s = format_sig(v, digits);
    double out = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
}

} // namespace heatring
