#include <gtest/gtest.h>

#include <cmath>

#include "heatring/anomaly.hpp"
#include "heatring/synth.hpp"
#include "support.hpp"

using namespace heatring;
using testing_support::code_of;

namespace {

ScenarioParams small_scenario() {
    ScenarioParams p;
    p.spec = GridSpec{60, 60, 10.0, 45.0, 0.005};
    p.start = Month::from_ym(2010, 1);
    p.months = 84;
    p.sites = {{"a", {45.151, 10.147}, Month::from_ym(2016, 1), 2.0, 4.51}};
    return p;
}

} // namespace

TEST(Synth, QuietScenarioIsConstant) {
    auto p = small_scenario();
    p.sites.clear();
    p.base_degC = 12.5;
    const auto sc = generate(p);
    EXPECT_EQ(sc.stack.size(), 84u);
    for (const auto& layer : sc.stack.layers)
        for (double v : layer) EXPECT_EQ(v, 12.5);
    p.sites = {{"zero", {45.1, 10.1}, Month::from_ym(2012, 1), 0.0, 4.51}};
    for (const auto& layer : generate(p).stack.layers)
        for (double v : layer) EXPECT_EQ(v, 12.5);
}

TEST(Synth, CenterCellDeltaIsKernelValue) {
    auto p = small_scenario();
    const auto sc = generate(p);
    const auto& site = p.sites[0];
    const auto cells = origin_cells(p.spec, site.point, 1.0, true);
    ASSERT_EQ(cells.size(), 1u);
    const auto rs = ring_series(sc.stack, cells, "a", 0.0);
    const double d0 = haversine_km(site.point, cell_center(p.spec, cells[0].row, cells[0].col));
    EXPECT_GT(d0, 0.05);
    EXPECT_NEAR(temporal_delta(rs.values, site.onset, 60), 2.0 * std::exp(-d0 * d0 / (2 * 4.51 * 4.51)), 1e-12);
}

TEST(Synth, SameSeedSameStack) {
    auto p = small_scenario();
    p.noise_sd_degC = 0.5;
    p.nodata_rate = 0.02;
    p.seasonal_amp_degC = 3.0;
    const auto a = generate(p, 1);
    const auto b = generate(p, 4);
    ASSERT_EQ(a.stack.size(), b.stack.size());
    for (std::size_t t = 0; t < a.stack.size(); ++t)
        for (std::size_t c = 0; c < a.stack.layers[t].size(); ++c) {
            const double x = a.stack.layers[t][c], y = b.stack.layers[t][c];
            EXPECT_TRUE((std::isnan(x) && std::isnan(y)) || x == y);
        }
    p.seed = 43;
    EXPECT_NE(generate(p).stack.layers[5], a.stack.layers[5]);
}

TEST(Synth, NoiseMoments) {
    auto p = small_scenario();
    p.sites.clear();
    p.noise_sd_degC = 0.5;
    const auto sc = generate(p);
    double s = 0, s2 = 0, n = 0;
    for (const auto& layer : sc.stack.layers)
        for (double v : layer) {
            s += v - p.base_degC;
            s2 += (v - p.base_degC) * (v - p.base_degC);
            ++n;
        }
    EXPECT_NEAR(s / n, 0.0, 4 * 0.5 / std::sqrt(n));
    EXPECT_NEAR(std::sqrt(s2 / n), 0.5, 0.005);
}

TEST(Synth, DailyCadenceEmitsEveryDay) {
    auto p = small_scenario();
    p.spec = GridSpec{3, 3, 10.0, 45.0, 0.005};
    p.sites.clear();
    p.cadence = Cadence::daily;
    p.start = Month::from_ym(2012, 1);
    p.months = 3;
    const auto sc = generate(p);
    EXPECT_EQ(sc.stack.size(), 31u + 29u + 31u);
    EXPECT_EQ(sc.stack.timeline[59], "2012-02-29");
    validate_stack(sc.stack);
}

TEST(Synth, Validation) {
    auto p = small_scenario();
    p.sites[0].point = {50.0, 10.0};
    EXPECT_EQ(code_of([&] { generate(p); }), ErrorCode::out_of_range);
    p = small_scenario();
    p.sites[0].onset = Month::from_ym(2030, 1);
    EXPECT_EQ(code_of([&] { generate(p); }), ErrorCode::validation);
    p = small_scenario();
    p.sites[0].sigma_km = 0.0;
    EXPECT_EQ(code_of([&] { generate(p); }), ErrorCode::validation);
}

TEST(ExpectedDelta, Examples) {
    auto p = small_scenario();
    const auto& site = p.sites[0];
    const auto ring0 = origin_cells(p.spec, site.point, 1.0, false);

    // small ring near the centre: close to the amplitude
    const double e0 = expected_delta(p, site, ring0, 60);
    EXPECT_GT(e0, 1.95);
    EXPECT_LT(e0, 2.0);

    // ramp only
    auto ramp = p;
    ramp.sites[0].amplitude_degC = 0.0;
    ramp.trend_degC_per_month = 0.003;
    EXPECT_NEAR(expected_delta(ramp, ramp.sites[0], ring0, 36), 0.003 * 37 / 2.0, 1e-15);

    // very wide kernel: uniform amplitude at every ring
    auto wide = p;
    wide.sites[0].sigma_km = 1e7;
    const auto part = ring_partition(p.spec, RingSpec{site.point, 10.0, 1.0});
    for (const auto& ring : part.rings) EXPECT_NEAR(expected_delta(wide, wide.sites[0], ring, 60), 2.0, 1e-9);
}

TEST(ExpectedDelta, MatchesNoiseFreeGeneration) {
    auto p = small_scenario();
    p.trend_degC_per_month = 0.002;
    p.sites.push_back({"b", {45.12, 10.2}, Month::from_ym(2014, 6), 1.5, 3.0});
    const auto sc = generate(p);
    for (const auto& site : p.sites) {
        const auto part = ring_partition(p.spec, RingSpec{site.point, 6.0, 1.0});
        for (const auto& ring : part.rings) {
            const auto rs = ring_series(sc.stack, ring, site.site_id, 0.0);
            for (int k : {12, 24, 41}) {
                const double measured = temporal_delta(rs.values, site.onset, k);
                EXPECT_NEAR(measured, expected_delta(p, site, ring, k), 1e-11);
            }
        }
    }
}

TEST(ExpectedDelta, NoiseConcentration) {
    ScenarioParams p;
    p.spec = GridSpec{100, 100, 30.0, 0.0, 0.005};
    p.start = Month::from_ym(2010, 1);
    p.months = 72;
    p.noise_sd_degC = 0.5;
    p.seed = 99;
    for (int i = 0; i < 50; ++i)
        p.sites.push_back({"s" + std::to_string(i),
                           {0.025 + 0.05 * (i / 10) + 0.0003 * i, 30.025 + 0.05 * (i % 10)},
                           Month::from_ym(2015, 1), 2.0, 4.51});
    const auto sc = generate(p);
    double measured = 0, expected = 0;
    std::size_t cells = 0;
    for (const auto& site : p.sites) {
        const auto ring0 = origin_cells(p.spec, site.point, 1.0, false);
        cells += ring0.size();
        measured += temporal_delta(ring_series(sc.stack, ring0, site.site_id, 0.0).values, site.onset, 48);
        expected += expected_delta(p, site, ring0, 48);
    }
    measured /= 50;
    expected /= 50;
    const double mean_cells = static_cast<double>(cells) / 50.0;
    EXPECT_LE(std::abs(measured - expected), 3 * 0.5 / std::sqrt(50 * mean_cells) + 0.02);
}

TEST(Population, IntegerAndDeterministic) {
    PopulationParams pp;
    pp.spec = GridSpec{50, 40, 10.0, 45.0, 0.001};
    pp.rural_per_cell = 0.7;
    pp.cores = {{{45.02, 10.02}, 30.0, 1.0}};
    const auto a = generate_population(pp);
    const auto b = generate_population(pp);
    EXPECT_EQ(a.values, b.values);
    double total = 0;
    for (double v : a.values) {
        EXPECT_EQ(v, std::floor(v));
        EXPECT_GE(v, 0.0);
        total += v;
    }
    double expected = 0;
    for (std::size_t r = 0; r < pp.spec.nrows; ++r)
        for (std::size_t c = 0; c < pp.spec.ncols; ++c) {
            const double d = haversine_km(pp.cores[0].center, cell_center(pp.spec, r, c));
            expected += 0.7 + 30.0 * std::exp(-d * d / 2.0);
        }
    EXPECT_NEAR(total / expected, 1.0, 0.02);
}
