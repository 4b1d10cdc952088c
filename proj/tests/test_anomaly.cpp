#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "heatring/anomaly.hpp"
#include "support.hpp"

using namespace heatring;
using testing_support::code_of;
using testing_support::monthly_stack;

namespace {

const Month kStart = Month::from_ym(2015, 1);

MonthlySeries make_series(Month first, int n, const std::function<double(int)>& f) {
    MonthlySeries s{first, {}};
    for (int t = 0; t < n; ++t) s.values.push_back(f(t));
    return s;
}

// Direct evaluation of the baseline-difference definition.
double delta_oracle(const std::vector<double>& x, std::size_t i, std::size_t k) {
    double sum = 0;
    for (std::size_t j = 1; j <= k; ++j) sum += x[i - j];
    return x[i] - sum / static_cast<double>(k);
}

// Quantile oracle written from the definition: h = (n-1) q, interpolate
// between the floor(h)-th and ceil(h)-th order statistics.
double quantile_oracle(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const double lo = v[static_cast<std::size_t>(std::floor(h))];
    const double hi = v[static_cast<std::size_t>(std::ceil(h))];
    return lo + (h - std::floor(h)) * (hi - lo);
}

RadialProfile profile_of(const std::vector<double>& mids, const std::vector<double>& means) {
    RadialProfile p;
    p.r_max_km = mids.back() + 0.5;
    for (std::size_t n = 0; n < mids.size(); ++n) {
        ProfileRing r;
        r.r_mid_km = mids[n];
        r.stats.mean = means[n];
        p.rings.push_back(r);
    }
    return p;
}

} // namespace

TEST(TemporalDelta, ConstantIsZero) {
    const auto s = make_series(kStart, 80, [](int) { return 17.3; });
    EXPECT_EQ(temporal_delta(s, kStart + 70, 60), 0.0);
}

TEST(TemporalDelta, StepAtOrigin) {
    const auto s = make_series(kStart, 80, [](int t) { return t >= 60 ? 2.0 : 0.0; });
    EXPECT_EQ(temporal_delta(s, kStart + 60, 60), 2.0);
}

TEST(TemporalDelta, Ramp) {
    const auto s = make_series(kStart, 10, [](int t) { return static_cast<double>(t); });
    EXPECT_DOUBLE_EQ(temporal_delta(s, kStart + 5, 2), 1.5);
}

TEST(TemporalDelta, InsufficientHistory) {
    const auto s = make_series(kStart, 30, [](int) { return 1.0; });
    EXPECT_EQ(code_of([&] { temporal_delta(s, kStart + 20, 21); }), ErrorCode::insufficient_history);
    EXPECT_EQ(code_of([&] { temporal_delta(s, kStart + 30, 5); }), ErrorCode::insufficient_history);
    EXPECT_EQ(code_of([&] { temporal_delta(s, kStart + 20, 0); }), ErrorCode::usage);
}

TEST(TemporalDelta, MissingValues) {
    auto s = make_series(kStart, 20, [](int t) { return t == 10 ? 5.0 : 1.0 * t; });
    s.values[10] = kNoData;
    EXPECT_FALSE(is_valid(temporal_delta(s, kStart + 10, 4)));
    // baseline mean over the valid months only
    s.values[10] = 10.0;
    s.values[8] = kNoData;
    EXPECT_DOUBLE_EQ(temporal_delta(s, kStart + 10, 4), 10.0 - (9 + 7 + 6) / 3.0);
    s.values[7] = kNoData;
    s.values[6] = kNoData;
    EXPECT_FALSE(is_valid(temporal_delta(s, kStart + 10, 4, 0.5)));
    EXPECT_DOUBLE_EQ(temporal_delta(s, kStart + 10, 4, 0.25), 1.0);
}

TEST(EpochSeries, ConstantAllZero) {
    const auto s = make_series(kStart, 100, [](int) { return 3.0; });
    const auto e = epoch_delta_series(s, kStart + 80, 60, 10);
    ASSERT_EQ(e.deltas.size(), 21u);
    for (double d : e.deltas) EXPECT_EQ(d, 0.0);
    EXPECT_TRUE(e.complete);
}

TEST(EpochSeries, StepMatchesOracle) {
    std::vector<double> x(100);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = t >= 80 ? 2.0 : 0.0;
    const auto e = epoch_delta_series(MonthlySeries{kStart, x}, kStart + 80, 60, 10);
    for (int i = -10; i <= 10; ++i) EXPECT_DOUBLE_EQ(e.at(i), delta_oracle(x, static_cast<std::size_t>(80 + i), 60));
    EXPECT_EQ(e.at(-1), 0.0);
    EXPECT_EQ(e.at(0), 2.0);
    EXPECT_DOUBLE_EQ(e.at(6), 2.0 * (1 - 6 / 60.0));
}

TEST(EpochSeries, ZeroHorizonAndPartialHistory) {
    const auto s = make_series(kStart, 100, [](int t) { return std::sin(t * 0.3); });
    const auto e = epoch_delta_series(s, kStart + 70, 24, 0);
    ASSERT_EQ(e.deltas.size(), 1u);
    EXPECT_EQ(e.at(0), temporal_delta(s, kStart + 70, 24));

    const auto trimmed = make_series(kStart, 70, [](int t) { return std::sin(t * 0.3); });
    const auto short_e = epoch_delta_series(trimmed, kStart + 65, 60, 10);
    EXPECT_FALSE(short_e.complete);
    EXPECT_FALSE(is_valid(short_e.at(-10)));
    EXPECT_TRUE(is_valid(short_e.at(0)));
    EXPECT_FALSE(is_valid(short_e.at(10)));  // beyond the series end
}

TEST(RingSeries, MembersAveraged) {
    const GridSpec spec{10, 10, 0, 0, 0.01};
    std::mt19937_64 gen(3);
    std::normal_distribution<double> d(0, 1);
    auto st = monthly_stack(spec, kStart, 12, [&](int, std::size_t) { return d(gen); });
    st.layers[4][spec.flat(5, 5)] = kNoData;

    const std::vector<CellHit> one{{2, 3, 0.0}};
    const auto r1 = ring_series(st, one, "s", 0.5);
    for (std::size_t t = 0; t < 12; ++t) EXPECT_EQ(r1.values.values[t], st.layers[t][spec.flat(2, 3)]);

    const std::vector<CellHit> two{{2, 3, 0.0}, {7, 1, 0.0}};
    const auto r2 = ring_series(st, two, "s", 0.5);
    for (std::size_t t = 0; t < 12; ++t)
        EXPECT_DOUBLE_EQ(r2.values.values[t], (st.layers[t][spec.flat(2, 3)] + st.layers[t][spec.flat(7, 1)]) / 2);

    std::vector<CellHit> many;
    for (std::size_t i = 0; i < 37; ++i) many.push_back({(i * 7) % 10, (i * 3 + i / 10) % 10, 0.0});
    const auto r3 = ring_series(st, many, "s", 0.5);
    for (std::size_t t = 0; t < 12; ++t) {
        double sum = 0;
        int n = 0;
        for (const auto& h : many) {
            const double v = st.layers[t][spec.flat(h.row, h.col)];
            if (is_valid(v)) {
                sum += v;
                ++n;
            }
        }
        EXPECT_NEAR(r3.values.values[t], sum / n, 1e-12);
    }
    EXPECT_EQ(code_of([&] { ring_series(st, std::vector<CellHit>{}, "s", 0.5); }), ErrorCode::empty_ring);
}

TEST(SpatialDelta, Examples) {
    const GridSpec spec{2, 2, 0, 0, 0.01};
    const SiteRecord site{"s", {0.01, 0.01}, kStart + 24, ""};
    const std::vector<CellHit> ring{{0, 0, 0}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0}};
    const auto flat = monthly_stack(spec, kStart, 30, [](int, std::size_t) { return 5.0; });
    EXPECT_EQ(spatial_delta(flat, ring, site, 12), 0.0);
    const auto step = monthly_stack(spec, kStart, 30, [](int t, std::size_t) { return t >= 24 ? 1.0 : 0.0; });
    EXPECT_EQ(spatial_delta(step, ring, site, 12), 1.0);
    const auto mixed =
        monthly_stack(spec, kStart, 30, [](int t, std::size_t c) { return t >= 24 && c < 2 ? 2.0 : 0.0; });
    EXPECT_EQ(spatial_delta(mixed, ring, site, 12), 1.0);
}

TEST(Band, SingleSiteCollapses) {
    EpochDeltaSeries s{"a", 60, 2, {0.1, -0.2, 2.0, 1.9, 1.8}};
    const auto b = aggregate_sites({s});
    for (int i = -2; i <= 2; ++i) {
        EXPECT_EQ(b.at(i).mean, s.at(i));
        EXPECT_EQ(b.at(i).lo, s.at(i));
        EXPECT_EQ(b.at(i).hi, s.at(i));
        EXPECT_EQ(b.at(i).n, 1u);
    }
}

TEST(Band, TwoSites) {
    const auto b = aggregate_sites({EpochDeltaSeries{"a", 60, 0, {1.0}}, EpochDeltaSeries{"b", 60, 0, {3.0}}});
    EXPECT_EQ(b.at(0).mean, 2.0);
    EXPECT_EQ(b.at(0).min, 1.0);
    EXPECT_EQ(b.at(0).max, 3.0);
}

TEST(Band, HundredSitesQuantile) {
    std::vector<EpochDeltaSeries> sites;
    std::vector<double> values;
    for (int j = 100; j >= 1; --j) {
        sites.push_back({"s" + std::to_string(j), 60, 0, {0.01 * j}});
        values.push_back(0.01 * j);
    }
    const auto b = aggregate_sites(sites);
    EXPECT_NEAR(b.at(0).hi, 0.97525, 1e-12);
    EXPECT_NEAR(b.at(0).hi, quantile_oracle(values, 0.975), 1e-12);
    EXPECT_NEAR(b.at(0).lo, quantile_oracle(values, 0.025), 1e-12);
    const auto u = aggregate_sites(sites, BandMode::upper95);
    EXPECT_EQ(u.at(0).lo, 0.01);
    EXPECT_NEAR(u.at(0).hi, quantile_oracle(values, 0.95), 1e-12);
}

TEST(Band, MissingSitesSkippedAndEmptyRowsNodata) {
    const auto b = aggregate_sites({EpochDeltaSeries{"a", 60, 1, {kNoData, 1.0, kNoData}},
                                    EpochDeltaSeries{"b", 60, 1, {kNoData, 3.0, 4.0}}});
    EXPECT_EQ(b.at(-1).n, 0u);
    EXPECT_FALSE(is_valid(b.at(-1).mean));
    EXPECT_EQ(b.at(1).n, 1u);
    EXPECT_EQ(b.at(1).mean, 4.0);
}

TEST(Band, OrderedStatistics) {
    std::mt19937_64 gen(8);
    std::lognormal_distribution<double> d(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + trial % 37);
        for (auto& x : v) x = d(gen) - 1.0;
        const auto s = band_stats(v);
        EXPECT_LE(s.min, s.lo);
        EXPECT_LE(s.lo, s.hi);
        EXPECT_LE(s.hi, s.max);
        EXPECT_LE(s.min, s.mean);
        EXPECT_LE(s.mean, s.max);
    }
}

TEST(Sweep, ConstantAndStep) {
    std::vector<SiteSeries> flat{{"a", kStart + 130, make_series(kStart, 140, [](int) { return 2.5; })}};
    for (const auto& row : table_sweep(flat, {12, 24, 36, 120})) EXPECT_EQ(row.average, 0.0);
    std::vector<SiteSeries> step{{"a", kStart + 130, make_series(kStart, 140, [](int t) { return t >= 130 ? 2.0 : 0.0; })}};
    for (const auto& row : table_sweep(step, {12, 24, 36, 120})) {
        EXPECT_EQ(row.average, 2.0);
        EXPECT_EQ(row.n_sites, 1u);
    }
}

TEST(Sweep, StepOnRampRisesWithK) {
    const double b = 0.002;
    std::vector<SiteSeries> s{
        {"a", kStart + 130, make_series(kStart, 140, [&](int t) { return b * t + (t >= 130 ? 2.0 : 0.0); })}};
    double prev = -1;
    for (const auto& row : table_sweep(s, {12, 24, 36, 120})) {
        EXPECT_NEAR(row.average, 2.0 + b * (row.k + 1) / 2.0, 1e-12);
        EXPECT_GT(row.average, prev);
        prev = row.average;
    }
}

TEST(Sweep, ShortSitesExcludedPerK) {
    std::vector<SiteSeries> s{{"long", kStart + 130, make_series(kStart, 140, [](int t) { return t >= 130 ? 1.0 : 0.0; })},
                              {"short", kStart + 30, make_series(kStart, 40, [](int t) { return t >= 30 ? 3.0 : 0.0; })}};
    const auto rows = table_sweep(s, {12, 120});
    EXPECT_EQ(rows[0].n_sites, 2u);
    EXPECT_EQ(rows[0].average, 2.0);
    EXPECT_EQ(rows[1].n_sites, 1u);
    ASSERT_EQ(rows[1].excluded.size(), 1u);
    EXPECT_EQ(rows[1].excluded[0], "short");
}

TEST(Radial, UniformStepIsFlat) {
    const GridSpec spec{120, 120, 10.0, 45.0, 0.005};
    const auto st = monthly_stack(spec, kStart, 30, [](int t, std::size_t) { return t >= 24 ? 1.5 : 0.0; });
    const std::vector<SiteRecord> sites{{"a", {45.3, 10.3}, kStart + 24, ""}, {"b", {45.25, 10.35}, kStart + 24, ""}};
    const auto res = radial_profile(st, sites, 10.0, 1.0, 12);
    ASSERT_EQ(res.profile.rings.size(), 10u);
    for (const auto& r : res.profile.rings) {
        EXPECT_DOUBLE_EQ(r.stats.mean, 1.5);
        EXPECT_EQ(r.stats.n, 2u);
    }
}

TEST(Radial, GaussianMatchesRingAverage) {
    const GridSpec spec{140, 140, 10.0, 45.0, 0.005};
    const GeoPoint c{45.35, 10.35};
    const double A = 2.0, sigma = 4.51;
    auto g = [&](std::size_t cell) {
        const double d = haversine_km(c, cell_center(spec, cell / spec.ncols, cell % spec.ncols));
        return A * std::exp(-d * d / (2 * sigma * sigma));
    };
    const auto st = monthly_stack(spec, kStart, 30, [&](int t, std::size_t cell) { return t >= 24 ? g(cell) : 0.0; });
    const SiteRecord site{"a", c, kStart + 24, ""};
    const auto res = radial_profile(st, {site, site}, 10.0, 1.0, 12, 0.5, BandMode::central95, 3);
    // brute force: every cell, binned by floor(d / dr)
    std::vector<double> sum(10, 0.0);
    std::vector<int> cnt(10, 0);
    for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) {
        const double d = haversine_km(c, cell_center(spec, cell / spec.ncols, cell % spec.ncols));
        if (d > 10.0) continue;
        const auto n = std::min<std::size_t>(9, static_cast<std::size_t>(d));
        sum[n] += g(cell);
        ++cnt[n];
    }
    for (std::size_t n = 0; n < 10; ++n) {
        EXPECT_NEAR(res.profile.rings[n].stats.mean, sum[n] / cnt[n], 1e-12);
        EXPECT_EQ(res.profile.rings[n].stats.n, 2u);
    }
}

TEST(Decay, WorkedExample) {
    const auto p = profile_of({0, 1, 2}, {2.0, 1.0, 0.5});
    const auto m = decay_metrics(p, 0.3, 1.0);
    EXPECT_EQ(m.peak, 2.0);
    ASSERT_TRUE(m.fraction_km);
    EXPECT_NEAR(*m.fraction_km, 1.8, 1e-12);
    ASSERT_TRUE(m.level_km);
    EXPECT_DOUBLE_EQ(*m.level_km, 1.0);
}

TEST(Decay, IncreasingIsBeyondRange) {
    const auto m = decay_metrics(profile_of({0.5, 1.5, 2.5}, {1.0, 2.0, 3.0}), 0.3, 0.5);
    EXPECT_FALSE(m.fraction_km);
    EXPECT_FALSE(m.level_km);
}

TEST(Decay, UndefinedPeak) {
    EXPECT_EQ(code_of([] { decay_metrics(profile_of({0.5, 1.5}, {0.0, -1.0})); }), ErrorCode::undefined_metrics);
    EXPECT_EQ(code_of([] { decay_metrics(profile_of({0.5, 1.5}, {kNoData, 1.0})); }), ErrorCode::undefined_metrics);
}

TEST(Decay, SkipsUndefinedRings) {
    const auto m = decay_metrics(profile_of({0.5, 1.5, 2.5}, {2.0, kNoData, 0.0}), 0.5, 1.0);
    EXPECT_NEAR(*m.fraction_km, 1.5, 1e-12);
}

TEST(Invariance, ShiftAndScale) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> d(10, 5);
    for (int trial = 0; trial < 100; ++trial) {
        auto s = make_series(kStart, 90, [&](int) { return d(gen); });
        auto shifted = s, doubled = s;
        for (auto& v : shifted.values) v += 10.0;
        for (auto& v : doubled.values) v *= 2.0;
        for (int k : {1, 12, 60}) {
            const auto a = epoch_delta_series(s, kStart + 75, k, 10);
            const auto b = epoch_delta_series(shifted, kStart + 75, k, 10);
            const auto c = epoch_delta_series(doubled, kStart + 75, k, 10);
            for (int i = -10; i <= 10; ++i) {
                EXPECT_NEAR(b.at(i), a.at(i), 1e-9);
                EXPECT_NEAR(c.at(i), 2 * a.at(i), 1e-9 * std::max(1.0, std::abs(2 * a.at(i))));
            }
        }
    }
}
