#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/parallel.hpp"
#include "heatring/series.hpp"
#include "heatring/sites.hpp"
#include "heatring/stack.hpp"
#include "heatring/time.hpp"

namespace heatring {

/// Per-cell mean of the valid daily values of each month. Months with fewer
/// than min_valid_days valid days become NODATA.
inline RasterStack monthly_from_daily(const RasterStack& daily, int min_valid_days = 8, unsigned workers = 1) {
    if (daily.cadence != Cadence::daily) throw Error(ErrorCode::usage, "monthly_from_daily requires a daily stack");
    validate_stack(daily);
    const auto months = stack_months(daily);

    // layer ranges per month; months come out in timeline order
    std::vector<Month> out_months;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t t = 0; t < months.size(); ++t) {
        if (out_months.empty() || out_months.back() != months[t]) {
            out_months.push_back(months[t]);
            ranges.emplace_back(t, t);
        }
        ranges.back().second = t + 1;
    }

    RasterStack out;
    out.variable = daily.variable;
    out.units = daily.units;
    out.cadence = Cadence::monthly;
    out.spec = daily.spec;
    for (const auto& m : out_months) out.timeline.push_back(m.label());
    for (std::size_t i = 1; i < out_months.size(); ++i)
        if (out_months[i] - out_months[i - 1] != 1) out.gaps_allowed = true;
    out.layers.assign(out_months.size(), std::vector<double>(daily.spec.cell_count(), kNoData));

    parallel_for(out_months.size(), workers, [&](std::size_t mi) {
        const auto [lo, hi] = ranges[mi];
        auto& dst = out.layers[mi];
        for (std::size_t c = 0; c < dst.size(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (std::size_t t = lo; t < hi; ++t) {
                const double v = daily.layers[t][c];
                if (!is_valid(v)) continue;
                sum += v;
                ++n;
            }
            if (n >= min_valid_days && n > 0) dst[c] = sum / n;
        }
    });
    return out;
}

/// Seasonal normal: one grid per calendar month (index 0 = January).
struct Climatology {
    GridSpec spec;
    std::array<std::vector<double>, 12> grids;
    std::vector<std::string> window;
};

struct MonthWindow {
    Month first;
    Month last;
};

inline Climatology climatology(const RasterStack& stack, MonthWindow window, int min_samples = 3,
                               unsigned workers = 1) {
    if (stack.cadence != Cadence::monthly) throw Error(ErrorCode::usage, "climatology requires a monthly stack");
    if (window.last < window.first)
        throw Error(ErrorCode::empty_window, "climatology window " + window.first.label() + ".." +
                                                 window.last.label() + " is empty");
    const auto months = stack_months(stack);
    if (months.empty() || window.first < months.front() || window.last > months.back())
        throw Error(ErrorCode::usage, "climatology window " + window.first.label() + ".." + window.last.label() +
                                          " is not inside the stack timeline");

    Climatology clim;
    clim.spec = stack.spec;
    std::array<std::vector<std::size_t>, 12> members;
    for (std::size_t t = 0; t < months.size(); ++t) {
        if (months[t] < window.first || months[t] > window.last) continue;
        members[static_cast<std::size_t>(months[t].calendar_month() - 1)].push_back(t);
        clim.window.push_back(stack.timeline[t]);
    }
    if (clim.window.empty()) throw Error(ErrorCode::empty_window, "climatology window holds no stack periods");

    parallel_for(12, workers, [&](std::size_t m) {
        auto& g = clim.grids[m];
        g.assign(stack.spec.cell_count(), kNoData);
        for (std::size_t c = 0; c < g.size(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (std::size_t t : members[m]) {
                const double v = stack.layers[t][c];
                if (!is_valid(v)) continue;
                sum += v;
                ++n;
            }
            if (n >= min_samples && n > 0) g[c] = sum / n;
        }
    });
    return clim;
}

/// Anomaly = value - climatology of the value's calendar month.
inline RasterStack deseasonalize(const RasterStack& stack, const Climatology& clim, unsigned workers = 1) {
    if (!same_geometry(stack.spec, clim.spec))
        throw Error(ErrorCode::spec_mismatch, "climatology grid does not match the stack grid");
    const auto months = stack_months(stack);
    RasterStack out = stack;
    parallel_for(stack.size(), workers, [&](std::size_t t) {
        const auto& normal = clim.grids[static_cast<std::size_t>(months[t].calendar_month() - 1)];
        auto& layer = out.layers[t];
        for (std::size_t c = 0; c < layer.size(); ++c) {
            const double v = layer[c];
            layer[c] = is_valid(v) && is_valid(normal[c]) ? v - normal[c] : kNoData;
        }
    });
    return out;
}

namespace detail {

// Median of v (reorders v); v must be non-empty.
inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

} // namespace detail

struct RobustScale {
    double median = 0.0;
    double scale = 0.0;
};

inline constexpr double kMadConsistency = 1.4826;

/// Median and floored MAD scale (1.4826 * MAD, at least scale_floor).
inline RobustScale robust_scale(std::vector<double> values, double scale_floor) {
    RobustScale rs;
    if (values.empty()) return rs;
    rs.median = detail::median_inplace(values);
    for (auto& v : values) v = std::abs(v - rs.median);
    rs.scale = std::max(kMadConsistency * detail::median_inplace(values), scale_floor);
    return rs;
}

struct MaskOptions {
    double mad_k = 3.0;
    double scale_floor = 0.05;
    /// 0: median/MAD over the whole per-cell series. w > 0: over the valid
    /// values within +-w layers of each value (a Hampel filter).
    int half_window = 0;
};

struct MaskResult {
    RasterStack stack;
    std::size_t masked = 0;
};

/// Per-cell robust outlier masking: values with |x - median| > mad_k * scale
/// become NODATA.
inline MaskResult mask_outliers(const RasterStack& anom, const MaskOptions& opt = {}, unsigned workers = 1) {
    MaskResult res{anom, 0};
    const std::size_t cells = anom.spec.cell_count();
    const std::size_t n = anom.size();
    std::vector<std::size_t> masked_per_cell(cells, 0);
    parallel_for(cells, workers, [&](std::size_t c) {
        std::vector<double> series(n);
        for (std::size_t t = 0; t < n; ++t) series[t] = anom.layers[t][c];
        std::vector<double> window;
        auto reject = [&](std::size_t t, const RobustScale& rs) {
            if (std::abs(series[t] - rs.median) > opt.mad_k * rs.scale) {
                res.stack.layers[t][c] = kNoData;
                ++masked_per_cell[c];
            }
        };
        if (opt.half_window <= 0) {
            for (double v : series)
                if (is_valid(v)) window.push_back(v);
            if (window.empty()) return;
            const auto rs = robust_scale(window, opt.scale_floor);
            for (std::size_t t = 0; t < n; ++t)
                if (is_valid(series[t])) reject(t, rs);
            return;
        }
        const auto w = static_cast<std::size_t>(opt.half_window);
        for (std::size_t t = 0; t < n; ++t) {
            if (!is_valid(series[t])) continue;
            window.clear();
            for (std::size_t u = t > w ? t - w : 0; u < std::min(n, t + w + 1); ++u)
                if (is_valid(series[u])) window.push_back(series[u]);
            reject(t, robust_scale(window, opt.scale_floor));
        }
    });
    for (auto m : masked_per_cell) res.masked += m;
    return res;
}

inline constexpr const char* kReasonOk = "ok";
inline constexpr const char* kReasonInsufficientHistory = "insufficient-history";
inline constexpr const char* kReasonOriginInvalid = "origin-invalid";
inline constexpr const char* kReasonLowCoverage = "low-coverage";
inline constexpr const char* kReasonEmptyRing = "empty-ring";
inline constexpr const char* kReasonDenseUrban = "dense-urban";
inline constexpr const char* kReasonNoCoverage = "no-coverage";

struct SiteValidity {
    bool keep = false;
    std::string reason = kReasonOk;
    double valid_fraction = 0.0;
};

/// Keep iff the series holds at least min_valid_fraction valid months over
/// [start - k - horizon, start + horizon] and the start month itself is valid.
inline SiteValidity site_validity(const MonthlySeries& series, Month start, int k, int horizon,
                                  double min_valid_fraction = 0.5) {
    SiteValidity out;
    const Month lo = start - k - horizon;
    const Month hi = start + horizon;
    if (!series.covers(lo) || !series.covers(hi)) {
        out.reason = kReasonInsufficientHistory;
        return out;
    }
    int valid = 0;
    for (Month m = lo; m <= hi; m = m + 1)
        if (is_valid(series.at(m))) ++valid;
    out.valid_fraction = static_cast<double>(valid) / static_cast<double>(hi - lo + 1);
    if (!is_valid(series.at(start))) {
        out.reason = kReasonOriginInvalid;
    } else if (out.valid_fraction < min_valid_fraction) {
        out.reason = kReasonLowCoverage;
    } else {
        out.keep = true;
    }
    return out;
}

/// Population per km^2 over the disk, as total population / total cell area
/// (NODATA counts as zero population). nullopt when the centre lies outside
/// the grid.
inline std::optional<double> mean_population_density(const Grid& pop, const GeoPoint& center, double radius_km) {
    const auto home = locate(pop.spec, center);
    if (!home) return std::nullopt;
    auto disk = cells_within_radius(pop.spec, center, radius_km);
    if (disk.cells.empty()) disk.cells.push_back({home->first, home->second, 0.0});
    double people = 0.0;
    double area = 0.0;
    for (const auto& h : disk.cells) {
        const double v = pop.at(h.row, h.col);
        if (is_valid(v)) people += v;
        area += cell_area_km2(pop.spec, h.row);
    }
    return people / area;
}

struct ExcludedSite {
    SiteRecord site;
    std::string reason;
    double density = kNoData;
};

struct UrbanFilterResult {
    std::vector<SiteRecord> kept;
    std::vector<ExcludedSite> excluded;
};

/// Drops sites whose surrounding mean population density strictly exceeds the
/// threshold, and sites outside the population grid.
inline UrbanFilterResult urban_filter(const std::vector<SiteRecord>& sites, const Grid& pop_1km,
                                      double radius_km = 5.0, double density_threshold = 1500.0) {
    UrbanFilterResult out;
    for (const auto& s : sites) {
        const auto density = mean_population_density(pop_1km, s.point, radius_km);
        if (!density)
            out.excluded.push_back({s, kReasonNoCoverage, kNoData});
        else if (*density > density_threshold)
            out.excluded.push_back({s, kReasonDenseUrban, *density});
        else
            out.kept.push_back(s);
    }
    return out;
}

} // namespace heatring
