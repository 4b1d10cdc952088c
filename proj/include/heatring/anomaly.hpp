#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/parallel.hpp"
#include "heatring/preprocess.hpp"
#include "heatring/series.hpp"
#include "heatring/sites.hpp"
#include "heatring/stack.hpp"

namespace heatring {

/// Delta_i(k) on an epoch axis i in [-horizon, +horizon], i = 0 at the start of
/// operations. Entries without enough history are kNoData.
struct EpochDeltaSeries {
    std::string site_id;
    int k = 60;
    int horizon = 10;
    std::vector<double> deltas;
    bool complete = true;

    double at(int i) const { return deltas.at(static_cast<std::size_t>(i + horizon)); }
};

inline EpochDeltaSeries epoch_delta_series(const MonthlySeries& series, Month start, int k, int horizon = 10,
                                           double min_valid_fraction = 0.5, const std::string& site_id = {}) {
    if (horizon < 0) throw Error(ErrorCode::usage, "horizon must be >= 0");
    EpochDeltaSeries out{site_id, k, horizon, std::vector<double>(static_cast<std::size_t>(2 * horizon + 1), kNoData)};
    for (int i = -horizon; i <= horizon; ++i) {
        try {
            out.deltas[static_cast<std::size_t>(i + horizon)] = temporal_delta(series, start + i, k, min_valid_fraction);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::insufficient_history) throw;
            out.complete = false;
        }
    }
    return out;
}

/// Delta of the ring-mean series at the start month (the ring form of the
/// baseline difference).
inline double spatial_delta(const RasterStack& anom, std::span<const CellHit> ring, const SiteRecord& site, int k,
                            double min_valid_fraction = 0.5) {
    const auto rs = ring_series(anom, ring, site.site_id, 0.0);
    return temporal_delta(rs.values, site.start_of_operations, k, min_valid_fraction);
}

/// Cells standing in for "the site itself": ring 0 of width dr_km, or the
/// single containing cell.
inline std::vector<CellHit> origin_cells(const GridSpec& spec, const GeoPoint& site, double dr_km,
                                         bool center_cell_only) {
    if (center_cell_only) {
        const auto home = locate(spec, site);
        if (!home) return {};
        return {CellHit{home->first, home->second, haversine_km(site, cell_center(spec, home->first, home->second))}};
    }
    return ring_partition(spec, RingSpec{site, dr_km, dr_km}).rings.front();
}

enum class BandMode {
    central95, ///< [p2.5, p97.5]
    upper95,   ///< [min, p95]
};

/// Linear-interpolation empirical quantile at position (n-1)*q of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return kNoData;
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct BandStats {
    double mean = kNoData;
    double min = kNoData;
    double max = kNoData;
    double lo = kNoData;
    double hi = kNoData;
    std::size_t n = 0;
};

/// Statistics of the valid entries of `values`, summed in the given order.
inline BandStats band_stats(std::span<const double> values, BandMode mode = BandMode::central95) {
    std::vector<double> v;
    v.reserve(values.size());
    double sum = 0.0;
    for (double x : values) {
        if (!is_valid(x)) continue;
        v.push_back(x);
        sum += x;
    }
    BandStats s;
    s.n = v.size();
    if (v.empty()) return s;
    s.mean = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    if (mode == BandMode::central95) {
        s.lo = quantile_sorted(v, 0.025);
        s.hi = quantile_sorted(v, 0.975);
    } else {
        s.lo = s.min;
        s.hi = quantile_sorted(v, 0.95);
    }
    // rounding can push the mean or an interpolated quantile an ulp outside [min, max]
    s.mean = std::clamp(s.mean, s.min, s.max);
    s.lo = std::clamp(s.lo, s.min, s.max);
    s.hi = std::clamp(s.hi, s.lo, s.max);
    return s;
}

struct AggregateBand {
    int horizon = 0;
    std::vector<BandStats> rows;

    const BandStats& at(int i) const { return rows.at(static_cast<std::size_t>(i + horizon)); }
};

/// Cross-site statistics at each epoch index, over the sites whose delta is
/// valid there. Sites contribute in list order.
inline AggregateBand aggregate_sites(const std::vector<EpochDeltaSeries>& series, BandMode mode = BandMode::central95) {
    if (series.empty()) throw Error(ErrorCode::usage, "aggregate_sites needs at least one site");
    AggregateBand band{series.front().horizon, {}};
    for (const auto& s : series)
        if (s.horizon != band.horizon || s.deltas.size() != static_cast<std::size_t>(2 * band.horizon + 1))
            throw Error(ErrorCode::usage, "all epoch series must share one horizon");
    std::vector<double> column(series.size());
    for (int i = -band.horizon; i <= band.horizon; ++i) {
        for (std::size_t s = 0; s < series.size(); ++s) column[s] = series[s].at(i);
        band.rows.push_back(band_stats(column, mode));
    }
    return band;
}

/// A site's origin series together with its epoch origin.
struct SiteSeries {
    std::string site_id;
    Month start;
    MonthlySeries series;
};

struct SweepRow {
    int k = 0;
    double average = kNoData;
    double minimum = kNoData;
    double maximum = kNoData;
    std::size_t n_sites = 0;
    std::vector<std::string> excluded;
};

/// Delta_0(k) statistics across sites for each k; sites lacking history (or a
/// valid delta) for a given k are left out of that k and listed.
inline std::vector<SweepRow> table_sweep(const std::vector<SiteSeries>& sites, const std::vector<int>& k_list,
                                         double min_valid_fraction = 0.5) {
    std::vector<SweepRow> out;
    for (int k : k_list) {
        SweepRow row;
        row.k = k;
        std::vector<double> values;
        for (const auto& s : sites) {
            double d = kNoData;
            try {
                d = temporal_delta(s.series, s.start, k, min_valid_fraction);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::insufficient_history) throw;
            }
            if (is_valid(d))
                values.push_back(d);
            else
                row.excluded.push_back(s.site_id);
        }
        const auto st = band_stats(values);
        row.average = st.mean;
        row.minimum = st.min;
        row.maximum = st.max;
        row.n_sites = st.n;
        out.push_back(std::move(row));
    }
    return out;
}

struct ProfileRing {
    double r_mid_km = 0.0;
    double r_inner_km = 0.0;
    double r_outer_km = 0.0;
    BandStats stats;
};

struct RadialProfile {
    double r_max_km = 10.0;
    double dr_km = 1.0;
    std::vector<ProfileRing> rings;
    std::size_t total_sites = 0;
};

/// Per-ring Delta_0^r(k) of one site; kNoData for rings that are empty, lack
/// history, or fail the validity rule.
inline std::vector<double> site_ring_deltas(const RasterStack& anom, const SiteRecord& site, double r_max_km,
                                            double dr_km, int k, double min_valid_fraction = 0.5) {
    const auto part = ring_partition(anom.spec, RingSpec{site.point, r_max_km, dr_km});
    std::vector<double> out(part.rings.size(), kNoData);
    for (std::size_t n = 0; n < part.rings.size(); ++n) {
        if (part.rings[n].empty()) continue;
        const auto rs = ring_series(anom, part.rings[n], site.site_id, part.spec.mid_km(n));
        if (!site_validity(rs.values, site.start_of_operations, k, 0, min_valid_fraction).keep) continue;
        out[n] = temporal_delta(rs.values, site.start_of_operations, k, min_valid_fraction);
    }
    return out;
}

/// Aggregates per-site ring deltas (one row per site, in order) into a profile.
inline RadialProfile profile_from_deltas(const std::vector<std::vector<double>>& per_site, double r_max_km,
                                         double dr_km, BandMode mode = BandMode::central95) {
    const RingSpec geom{GeoPoint{}, r_max_km, dr_km};
    geom.validate();
    RadialProfile p{r_max_km, dr_km, {}, per_site.size()};
    std::vector<double> column(per_site.size());
    for (std::size_t n = 0; n < geom.ring_count(); ++n) {
        for (std::size_t s = 0; s < per_site.size(); ++s)
            column[s] = n < per_site[s].size() ? per_site[s][n] : kNoData;
        p.rings.push_back({geom.mid_km(n), geom.inner_km(n), geom.outer_km(n), band_stats(column, mode)});
    }
    return p;
}

struct RadialResult {
    RadialProfile profile;
    std::vector<std::vector<double>> site_deltas;
};

inline RadialResult radial_profile(const RasterStack& anom, const std::vector<SiteRecord>& sites, double r_max_km,
                                   double dr_km, int k, double min_valid_fraction = 0.5,
                                   BandMode mode = BandMode::central95, unsigned workers = 1) {
    RadialResult out;
    out.site_deltas.resize(sites.size());
    parallel_for(sites.size(), workers, [&](std::size_t s) {
        out.site_deltas[s] = site_ring_deltas(anom, sites[s], r_max_km, dr_km, k, min_valid_fraction);
    });
    out.profile = profile_from_deltas(out.site_deltas, r_max_km, dr_km, mode);
    return out;
}

struct DecayMetrics {
    double peak = 0.0;
    /// Distance at which the mean profile first falls to fraction * peak;
    /// nullopt = beyond range.
    std::optional<double> fraction_km;
    /// Distance at which the mean profile first falls to the absolute level.
    std::optional<double> level_km;
};

namespace detail {

// First downward crossing of `target`, linearly interpolated between radii.
inline std::optional<double> first_crossing(const std::vector<double>& r, const std::vector<double>& y, double target) {
    for (std::size_t n = 1; n < y.size(); ++n) {
        if (y[n - 1] > target && y[n] <= target) {
            const double t = (y[n - 1] - target) / (y[n - 1] - y[n]);
            return r[n - 1] + t * (r[n] - r[n - 1]);
        }
    }
    return std::nullopt;
}

} // namespace detail

inline DecayMetrics decay_metrics(const RadialProfile& profile, double fraction = 0.3, double abs_level_degC = 1.0) {
    std::vector<double> r, y;
    for (const auto& ring : profile.rings) {
        if (!is_valid(ring.stats.mean)) continue;
        r.push_back(ring.r_mid_km);
        y.push_back(ring.stats.mean);
    }
    if (profile.rings.empty() || !is_valid(profile.rings.front().stats.mean) || !(profile.rings.front().stats.mean > 0))
        throw Error(ErrorCode::undefined_metrics, "decay metrics need a positive mean at the innermost ring");
    DecayMetrics m;
    m.peak = y.front();
    m.fraction_km = detail::first_crossing(r, y, fraction * m.peak);
    m.level_km = detail::first_crossing(r, y, abs_level_degC);
    return m;
}

} // namespace heatring
