#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "heatring/anomaly.hpp"
#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/parallel.hpp"
#include "heatring/sites.hpp"

namespace heatring {

struct CoarsenResult {
    Grid coarse;
    std::size_t nodata_cells = 0;
};

/// Block-sums a population-count grid by `factor` in each direction. NODATA
/// cells contribute zero and are counted.
inline CoarsenResult coarsen_population(const Grid& fine, std::size_t factor = 10) {
    const auto& fs = fine.spec;
    if (factor == 0) throw Error(ErrorCode::usage, "coarsening factor must be >= 1");
    if (fs.nrows % factor != 0 || fs.ncols % factor != 0)
        throw Error(ErrorCode::not_divisible, "population grid " + std::to_string(fs.nrows) + "x" +
                                                  std::to_string(fs.ncols) + " is not divisible by factor " +
                                                  std::to_string(factor) + "; pad or crop it to a multiple first");
    GridSpec cs = fs;
    cs.nrows = fs.nrows / factor;
    cs.ncols = fs.ncols / factor;
    cs.cellsize_deg = fs.cellsize_deg * static_cast<double>(factor);
    CoarsenResult out{Grid(cs, 0.0), 0};
    for (std::size_t r = 0; r < cs.nrows; ++r)
        for (std::size_t c = 0; c < cs.ncols; ++c) {
            double sum = 0.0;
            for (std::size_t i = 0; i < factor; ++i)
                for (std::size_t j = 0; j < factor; ++j) {
                    const double v = fine.at(r * factor + i, c * factor + j);
                    if (is_valid(v))
                        sum += v;
                    else
                        ++out.nodata_cells;
                }
            out.coarse.at(r, c) = sum;
        }
    return out;
}

/// Sum of all valid cells, in row-major order.
inline double total_population(const Grid& g) {
    double sum = 0.0;
    for (double v : g.values)
        if (is_valid(v)) sum += v;
    return sum;
}

/// Mean-profile value at distance d: linear between ring midpoints, held flat
/// inside the first and past the last midpoint, zero beyond r_max.
inline double site_delta_at(const RadialProfile& profile, double d_km) {
    if (!(d_km >= 0.0)) throw Error(ErrorCode::out_of_range, "distance must be >= 0");
    std::vector<double> r, y;
    for (const auto& ring : profile.rings)
        if (is_valid(ring.stats.mean)) {
            r.push_back(ring.r_mid_km);
            y.push_back(ring.stats.mean);
        }
    if (r.empty()) throw Error(ErrorCode::empty_profile, "radial profile has no defined rings");
    if (d_km > profile.r_max_km) return 0.0;
    if (d_km <= r.front()) return y.front();
    if (d_km >= r.back()) return y.back();
    const auto n = static_cast<std::size_t>(std::upper_bound(r.begin(), r.end(), d_km) - r.begin());
    const double t = (d_km - r[n - 1]) / (r[n] - r[n - 1]);
    return y[n - 1] + t * (y[n] - y[n - 1]);
}

enum class Dedup { max, per_site };

inline std::string_view to_string(Dedup d) { return d == Dedup::max ? "max" : "per-site"; }

inline Dedup parse_dedup(std::string_view s) {
    if (s == "max") return Dedup::max;
    if (s == "per-site") return Dedup::per_site;
    throw Error(ErrorCode::validation, "dedup must be \"max\" or \"per-site\", got '" + std::string(s) + "'");
}

struct ExposureHistogram {
    double bin_width = 0.5;
    double r_max_km = 10.0;
    Dedup dedup = Dedup::max;
    /// bin n covers [n * bin_width, (n + 1) * bin_width)
    std::vector<double> counts;
    double total = 0.0;
    /// population in covered cells whose delta is negative (not binned)
    double below_zero = 0.0;
    std::size_t covered_cells = 0;
    std::size_t skipped_sites = 0;

    double bin_lo(std::size_t n) const { return static_cast<double>(n) * bin_width; }
    double bin_hi(std::size_t n) const { return static_cast<double>(n + 1) * bin_width; }
};

/// Population within r_max of any site, binned by the LST increase it
/// experiences. `profiles` holds one profile per site, or a single profile
/// shared by all sites. Sites whose profile has no defined ring are skipped.
inline ExposureHistogram exposure_histogram(const std::vector<SiteRecord>& sites,
                                            const std::vector<RadialProfile>& profiles, const Grid& pop_coarse,
                                            double r_max_km = 10.0, double bin_width = 0.5,
                                            Dedup dedup = Dedup::max, unsigned workers = 1) {
    if (!(bin_width > 0.0)) throw Error(ErrorCode::usage, "bin width must be positive");
    if (profiles.size() != sites.size() && profiles.size() != 1)
        throw Error(ErrorCode::usage, "need one radial profile per site or a single shared profile");
    ExposureHistogram h;
    h.bin_width = bin_width;
    h.r_max_km = r_max_km;
    h.dedup = dedup;

    struct Hit {
        std::size_t flat;
        double delta;
    };
    std::vector<std::vector<Hit>> per_site(sites.size());
    std::vector<char> skipped(sites.size(), 0);
    parallel_for(sites.size(), workers, [&](std::size_t s) {
        const auto& prof = profiles.size() == 1 ? profiles.front() : profiles[s];
        const bool defined = std::any_of(prof.rings.begin(), prof.rings.end(),
                                         [](const ProfileRing& r) { return is_valid(r.stats.mean); });
        if (!defined) {
            skipped[s] = 1;
            return;
        }
        for (const auto& c : cells_within_radius(pop_coarse.spec, sites[s].point, r_max_km).cells)
            per_site[s].push_back({pop_coarse.spec.flat(c.row, c.col), site_delta_at(prof, c.distance_km)});
    });
    for (char k : skipped) h.skipped_sites += static_cast<std::size_t>(k);

    // (delta, population) entries in a deterministic order
    std::vector<std::pair<double, double>> entries;
    if (dedup == Dedup::max) {
        std::vector<double> cell_delta(pop_coarse.spec.cell_count(), kNoData);
        for (const auto& hits : per_site)
            for (const auto& hit : hits)
                if (!is_valid(cell_delta[hit.flat]) || hit.delta > cell_delta[hit.flat])
                    cell_delta[hit.flat] = hit.delta;
        for (std::size_t i = 0; i < cell_delta.size(); ++i)
            if (is_valid(cell_delta[i])) entries.emplace_back(cell_delta[i], pop_coarse.values[i]);
    } else {
        for (const auto& hits : per_site)
            for (const auto& hit : hits) entries.emplace_back(hit.delta, pop_coarse.values[hit.flat]);
    }
    h.covered_cells = entries.size();

    double max_delta = -1.0;
    for (const auto& [d, p] : entries)
        if (d >= 0.0) max_delta = std::max(max_delta, d);
    if (max_delta >= 0.0) h.counts.assign(static_cast<std::size_t>(std::floor(max_delta / bin_width)) + 1, 0.0);
    for (const auto& [d, p] : entries) {
        const double people = is_valid(p) ? p : 0.0;
        if (d < 0.0) {
            h.below_zero += people;
            continue;
        }
        const auto bin = std::min(static_cast<std::size_t>(std::floor(d / bin_width)), h.counts.size() - 1);
        h.counts[bin] += people;
    }
    for (double c : h.counts) h.total += c;
    return h;
}

/// Population in bins whose lower edge is >= min_delta.
inline double total_affected(const ExposureHistogram& h, double min_delta = 0.0) {
    double sum = 0.0;
    for (std::size_t n = 0; n < h.counts.size(); ++n)
        if (h.bin_lo(n) >= min_delta) sum += h.counts[n];
    return sum;
}

} // namespace heatring
