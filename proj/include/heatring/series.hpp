#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/stack.hpp"
#include "heatring/time.hpp"

namespace heatring {

/// Values on a contiguous month axis starting at `first`; missing months are kNoData.
struct MonthlySeries {
    Month first;
    std::vector<double> values;

    Month last() const { return first + static_cast<int>(values.size()) - 1; }
    bool covers(Month m) const { return !values.empty() && m >= first && m <= last(); }
    double at(Month m) const { return covers(m) ? values[static_cast<std::size_t>(m - first)] : kNoData; }
};

/// Mean of the valid ring members per month (T-bar in the ring notation).
struct RingSeries {
    std::string site_id;
    double r_mid_km = 0.0;
    std::vector<CellHit> members;
    MonthlySeries values;
    std::vector<std::size_t> valid_cells;
};

/// Position of each month of [first, last] in the stack, or -1 for gaps.
inline std::vector<long> month_slots(const RasterStack& stack, Month& first) {
    if (stack.cadence != Cadence::monthly)
        throw Error(ErrorCode::usage, "monthly stack required, got cadence '" + std::string(to_string(stack.cadence)) + "'");
    const auto months = stack_months(stack);
    if (months.empty()) throw Error(ErrorCode::validation, "stack has no periods");
    first = months.front();
    std::vector<long> slots(static_cast<std::size_t>(months.back() - first + 1), -1);
    for (std::size_t t = 0; t < months.size(); ++t) slots[static_cast<std::size_t>(months[t] - first)] = static_cast<long>(t);
    return slots;
}

inline RingSeries ring_series(const RasterStack& stack, std::span<const CellHit> members, const std::string& site_id,
                              double r_mid_km) {
    if (members.empty()) throw Error(ErrorCode::empty_ring, "ring at " + std::to_string(r_mid_km) + " km of site '" + site_id + "' holds no cells");
    RingSeries out;
    out.site_id = site_id;
    out.r_mid_km = r_mid_km;
    out.members.assign(members.begin(), members.end());
    const auto slots = month_slots(stack, out.values.first);
    out.values.values.assign(slots.size(), kNoData);
    out.valid_cells.assign(slots.size(), 0);
    for (std::size_t u = 0; u < slots.size(); ++u) {
        if (slots[u] < 0) continue;
        const auto& layer = stack.layers[static_cast<std::size_t>(slots[u])];
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& m : members) {
            const double v = layer[stack.spec.flat(m.row, m.col)];
            if (!is_valid(v)) continue;
            sum += v;
            ++n;
        }
        out.valid_cells[u] = n;
        if (n > 0) out.values.values[u] = sum / static_cast<double>(n);
    }
    return out;
}

/// Current month minus the mean of the k preceding months:
///   delta = T[i] - (1/k) * sum_{j=1..k} T[i-j]
/// The baseline mean runs over valid months only; the result is kNoData when
/// T[i] is missing or fewer than min_valid_fraction * k baseline months are valid.
/// Throws insufficient_history when months i-k..i are not all on the series axis.
inline double temporal_delta(const MonthlySeries& series, Month i, int k, double min_valid_fraction = 0.5) {
    if (k < 1) throw Error(ErrorCode::usage, "baseline window k must be >= 1");
    if (!series.covers(i) || !series.covers(i - k))
        throw Error(ErrorCode::insufficient_history,
                    "series lacks months " + (i - k).label() + ".." + i.label() + " for k=" + std::to_string(k));
    const double current = series.at(i);
    if (!is_valid(current)) return kNoData;
    // summing deviations from T[i] keeps constant series at exactly zero
    double sum = 0.0;
    int valid = 0;
    for (int j = 1; j <= k; ++j) {
        const double v = series.at(i - j);
        if (!is_valid(v)) continue;
        sum += v - current;
        ++valid;
    }
    if (valid == 0 || static_cast<double>(valid) < min_valid_fraction * static_cast<double>(k)) return kNoData;
    return -sum / static_cast<double>(valid);
}

} // namespace heatring
