#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/parallel.hpp"
#include "heatring/sites.hpp"
#include "heatring/stack.hpp"
#include "heatring/time.hpp"

namespace heatring {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, a, b), so generation can be split across threads in any way
// and still be bit-identical.
//
//   h = splitmix64(seed); h = splitmix64(h ^ stream); h = splitmix64(h ^ a);
//   h = splitmix64(h ^ b); uniform = (h >> 11) * 2^-53
//
// Normals use Box-Muller on the draws (a, 2b) and (a, 2b + 1), keeping the
// cosine branch.
namespace rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
    const double u1 = 1.0 - uniform(seed, stream, a, 2 * b); // (0, 1]
    const double u2 = uniform(seed, stream, a, 2 * b + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline constexpr std::uint64_t kNoiseStream = 1;
inline constexpr std::uint64_t kDropStream = 2;
inline constexpr std::uint64_t kPopulationStream = 3;

} // namespace rng

struct SynthSite {
    std::string site_id;
    GeoPoint point;
    Month onset;
    double amplitude_degC = 2.0;
    double sigma_km = 4.51;
};

struct ScenarioParams {
    GridSpec spec;
    Cadence cadence = Cadence::monthly;
    Month start = Month::from_ym(2010, 1);
    int months = 132;
    double base_degC = 20.0;
    double seasonal_amp_degC = 0.0;
    /// calendar month (1..12) of the seasonal maximum
    double seasonal_phase_month = 7.0;
    double trend_degC_per_month = 0.0;
    double noise_sd_degC = 0.0;
    /// probability that a value is dropped to NODATA
    double nodata_rate = 0.0;
    std::uint64_t seed = 42;
    std::vector<SynthSite> sites;

    void validate() const {
        spec.validate();
        if (months < 1) throw Error(ErrorCode::validation, "scenario needs at least one month");
        if (!(noise_sd_degC >= 0.0)) throw Error(ErrorCode::validation, "noise_sd must be >= 0");
        if (!(nodata_rate >= 0.0 && nodata_rate < 1.0)) throw Error(ErrorCode::validation, "nodata_rate must be in [0, 1)");
        for (const auto& s : sites) {
            if (!(s.sigma_km > 0.0) || !std::isfinite(s.sigma_km))
                throw Error(ErrorCode::validation, "site '" + s.site_id + "': sigma_km must be > 0");
            if (!std::isfinite(s.amplitude_degC))
                throw Error(ErrorCode::validation, "site '" + s.site_id + "': amplitude must be finite");
            if (s.onset < start || s.onset > start + (months - 1))
                throw Error(ErrorCode::validation, "site '" + s.site_id + "': onset " + s.onset.label() +
                                                       " outside the scenario timeline");
            if (!is_valid(s.point) || !locate(spec, s.point))
                throw Error(ErrorCode::out_of_range, "site '" + s.site_id + "' lies outside the grid");
        }
    }
};

struct Scenario {
    RasterStack stack;
    std::vector<SiteRecord> sites;
};

/// Injected warming A * exp(-d^2 / (2 sigma^2)) of one site at distance d.
inline double site_kernel(const SynthSite& s, double d_km) {
    return s.amplitude_degC * std::exp(-d_km * d_km / (2.0 * s.sigma_km * s.sigma_km));
}

/// T(cell, t) = base + amp cos(2 pi (month(t) - phase) / 12) + trend t
///            + sum_sites A 1[t >= onset] exp(-d^2 / 2 sigma^2) + noise
/// with t counted in months from the scenario start.
inline Scenario generate(const ScenarioParams& p, unsigned workers = 1) {
    p.validate();
    const auto& spec = p.spec;
    const std::size_t cells = spec.cell_count();

    // cumulative injection field per distinct onset, in onset order
    std::map<Month, std::vector<std::size_t>> groups;
    for (std::size_t s = 0; s < p.sites.size(); ++s) groups[p.sites[s].onset].push_back(s);
    std::map<Month, std::vector<double>> fields;
    std::vector<double> running(cells, 0.0);
    for (const auto& [onset, members] : groups) {
        for (std::size_t r = 0; r < spec.nrows; ++r)
            for (std::size_t c = 0; c < spec.ncols; ++c) {
                const auto center = cell_center(spec, r, c);
                for (std::size_t s : members)
                    running[spec.flat(r, c)] += site_kernel(p.sites[s], haversine_km(p.sites[s].point, center));
            }
        fields[onset] = running;
    }

    Scenario out;
    auto& st = out.stack;
    st.cadence = p.cadence;
    st.spec = spec;
    std::vector<Month> layer_month;
    for (int m = 0; m < p.months; ++m) {
        const Month month = p.start + m;
        if (p.cadence == Cadence::monthly) {
            st.timeline.push_back(month.label());
            layer_month.push_back(month);
            continue;
        }
        using namespace std::chrono;
        const year_month ym{year{month.year()}, std::chrono::month{static_cast<unsigned>(month.calendar_month())}};
        const auto ndays = static_cast<unsigned>((ym / last).day());
        for (unsigned d = 1; d <= ndays; ++d) {
            st.timeline.push_back(day_label(ym / day{d}));
            layer_month.push_back(month);
        }
    }
    st.layers.assign(st.timeline.size(), {});

    parallel_for(st.timeline.size(), workers, [&](std::size_t t) {
        const Month month = layer_month[t];
        const double tm = static_cast<double>(month - p.start);
        const double seasonal =
            p.seasonal_amp_degC *
            std::cos(2.0 * std::numbers::pi * (month.calendar_month() - p.seasonal_phase_month) / 12.0);
        const double background = p.base_degC + seasonal + p.trend_degC_per_month * tm;
        const std::vector<double>* inject = nullptr;
        for (const auto& [onset, field] : fields)
            if (onset <= month) inject = &field;
        auto& layer = st.layers[t];
        layer.resize(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            double v = background;
            if (inject) v += (*inject)[c];
            if (p.noise_sd_degC > 0.0) v += p.noise_sd_degC * rng::normal(p.seed, rng::kNoiseStream, t, c);
            if (p.nodata_rate > 0.0 && rng::uniform(p.seed, rng::kDropStream, t, c) < p.nodata_rate) v = kNoData;
            layer[c] = v;
        }
    });

    for (const auto& s : p.sites) out.sites.push_back({s.site_id, s.point, s.onset, "synthetic"});
    return out;
}

/// Closed-form expectation of Delta_0(k) over `cells` of the scenario grid for
/// a site: the ring mean of the injected step (every site's kernel weighted by
/// its share of post-onset months at the origin minus in the baseline) plus
/// the ramp term trend * (k + 1) / 2. Seasonality is assumed removed.
inline double expected_delta(const ScenarioParams& p, const SynthSite& site, std::span<const CellHit> cells, int k) {
    if (k < 1) throw Error(ErrorCode::usage, "baseline window k must be >= 1");
    const Month origin = site.onset;
    double ring = 0.0;
    if (!cells.empty()) {
        for (const auto& c : cells) {
            const auto center = cell_center(p.spec, c.row, c.col);
            for (const auto& s : p.sites) {
                const double at_origin = origin >= s.onset ? 1.0 : 0.0;
                int post = 0;
                for (int j = 1; j <= k; ++j)
                    if (origin - j >= s.onset) ++post;
                const double weight = at_origin - static_cast<double>(post) / k;
                if (weight != 0.0) ring += weight * site_kernel(s, haversine_km(s.point, center));
            }
        }
        ring /= static_cast<double>(cells.size());
    }
    return ring + p.trend_degC_per_month * (k + 1) / 2.0;
}

struct UrbanCore {
    GeoPoint center;
    double peak_per_cell = 0.0;
    double sigma_km = 2.0;
};

struct PopulationParams {
    GridSpec spec;
    double rural_per_cell = 1.0;
    std::vector<UrbanCore> cores;
    std::uint64_t seed = 42;
};

/// Integer population counts: the expected density is rounded stochastically
/// (floor(expected + u)) with a counter-based uniform per cell.
inline Grid generate_population(const PopulationParams& p) {
    p.spec.validate();
    Grid g(p.spec, 0.0);
    for (std::size_t r = 0; r < p.spec.nrows; ++r)
        for (std::size_t c = 0; c < p.spec.ncols; ++c) {
            const auto center = cell_center(p.spec, r, c);
            double expected = p.rural_per_cell;
            for (const auto& core : p.cores) {
                const double d = haversine_km(core.center, center);
                expected += core.peak_per_cell * std::exp(-d * d / (2.0 * core.sigma_km * core.sigma_km));
            }
            const auto flat = p.spec.flat(r, c);
            g.values[flat] = std::floor(expected + rng::uniform(p.seed, rng::kPopulationStream, 0, flat));
        }
    return g;
}

} // namespace heatring
