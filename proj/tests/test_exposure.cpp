#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "heatring/exposure.hpp"
#include "support.hpp"

using namespace heatring;
using testing_support::code_of;

namespace {

RadialProfile flat_profile(double value, double r_max = 10.0, double dr = 1.0) {
    const RingSpec geom{GeoPoint{}, r_max, dr};
    std::vector<double> row(geom.ring_count(), value);
    return profile_from_deltas({row}, r_max, dr);
}

RadialProfile two_ring_profile(double a, double b) { return profile_from_deltas({{a, b}}, 2.0, 1.0); }

} // namespace

TEST(Coarsen, ZerosAndUniform) {
    const auto z = coarsen_population(Grid(GridSpec{20, 30, 0, 0, 0.001}, 0.0));
    EXPECT_EQ(z.coarse.spec.ncols, 2u);
    EXPECT_EQ(z.coarse.spec.nrows, 3u);
    EXPECT_DOUBLE_EQ(z.coarse.spec.cellsize_deg, 0.01);
    for (double v : z.coarse.values) EXPECT_EQ(v, 0.0);
    const auto u = coarsen_population(Grid(GridSpec{20, 30, 0, 0, 0.001}, 1.0));
    for (double v : u.coarse.values) EXPECT_EQ(v, 100.0);
}

TEST(Coarsen, NotDivisible) {
    try {
        coarsen_population(Grid(GridSpec{25, 30, 0, 0, 0.001}, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_divisible);
        EXPECT_NE(std::string(e.what()).find("pad or crop"), std::string::npos);
    }
}

TEST(Coarsen, ConservesIntegerCountsExactly) {
    std::mt19937_64 gen(50);
    std::uniform_int_distribution<int> count(0, 5000), dim(1, 6), fac(1, 5);
    std::bernoulli_distribution hole(0.05);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t f = static_cast<std::size_t>(fac(gen));
        Grid g(GridSpec{f * static_cast<std::size_t>(dim(gen)), f * static_cast<std::size_t>(dim(gen)), 0, 0, 0.001});
        std::size_t holes = 0;
        for (auto& v : g.values) {
            if (hole(gen)) {
                v = kNoData;
                ++holes;
            } else {
                v = count(gen);
            }
        }
        const auto c = coarsen_population(g, f);
        EXPECT_EQ(total_population(c.coarse), total_population(g));
        EXPECT_EQ(c.nodata_cells, holes);
    }
}

TEST(Coarsen, FractionalCountsWithinRounding) {
    std::mt19937_64 gen(51);
    std::uniform_real_distribution<double> u(0, 30);
    Grid g(GridSpec{100, 100, 0, 0, 0.001});
    for (auto& v : g.values) v = u(gen);
    const double total = total_population(g);
    EXPECT_NEAR(total_population(coarsen_population(g).coarse), total, 1e-12 * total);
}

TEST(SiteDelta, Interpolation) {
    const auto p = two_ring_profile(2.0, 1.0);
    EXPECT_EQ(site_delta_at(p, 0.5), 2.0);
    EXPECT_EQ(site_delta_at(p, 0.0), 2.0);
    EXPECT_DOUBLE_EQ(site_delta_at(p, 1.0), 1.5);
    EXPECT_EQ(site_delta_at(p, 1.5), 1.0);
    EXPECT_EQ(site_delta_at(p, 2.0), 1.0);
    EXPECT_EQ(site_delta_at(p, 2.01), 0.0);
    EXPECT_EQ(code_of([&] { site_delta_at(p, -1.0); }), ErrorCode::out_of_range);
    EXPECT_EQ(code_of([] { site_delta_at(two_ring_profile(kNoData, kNoData), 1.0); }), ErrorCode::empty_profile);
}

TEST(Histogram, NoPopulation) {
    const Grid pop(GridSpec{40, 40, 10.0, 45.0, 0.01}, 0.0);
    const std::vector<SiteRecord> sites{{"a", {45.2, 10.2}, Month{}, ""}};
    const auto h = exposure_histogram(sites, {flat_profile(2.0)}, pop);
    EXPECT_EQ(h.total, 0.0);
    for (double c : h.counts) EXPECT_EQ(c, 0.0);
}

TEST(Histogram, FlatProfileSingleBin) {
    const Grid pop(GridSpec{40, 40, 10.0, 45.0, 0.01}, 7.0);
    const std::vector<SiteRecord> sites{{"a", {45.2, 10.2}, Month{}, ""}};
    const auto h = exposure_histogram(sites, {flat_profile(2.0)}, pop, 10.0, 0.5);
    const auto covered = cells_within_radius(pop.spec, sites[0].point, 10.0).cells.size();
    ASSERT_EQ(h.counts.size(), 5u);
    EXPECT_EQ(h.bin_lo(4), 2.0);
    EXPECT_EQ(h.counts[4], 7.0 * static_cast<double>(covered));
    EXPECT_EQ(h.total, h.counts[4]);
}

TEST(Histogram, OverlapCountedOnceAtMax) {
    Grid pop(GridSpec{40, 40, 10.0, 45.0, 0.01}, 0.0);
    std::mt19937_64 gen(9);
    std::uniform_int_distribution<int> u(0, 900);
    for (auto& v : pop.values) v = u(gen);
    const std::vector<SiteRecord> sites{{"a", {45.2, 10.15}, Month{}, ""}, {"b", {45.2, 10.25}, Month{}, ""}};
    const std::vector<RadialProfile> profiles{flat_profile(1.0), flat_profile(2.0)};
    const auto h = exposure_histogram(sites, profiles, pop, 10.0, 0.5, Dedup::max);

    // brute force: every coarse cell, max delta over the sites that reach it
    std::vector<double> oracle(5, 0.0);
    for (std::size_t r = 0; r < pop.spec.nrows; ++r)
        for (std::size_t c = 0; c < pop.spec.ncols; ++c) {
            double best = -1;
            const auto p = cell_center(pop.spec, r, c);
            if (haversine_km(sites[0].point, p) <= 10.0) best = std::max(best, 1.0);
            if (haversine_km(sites[1].point, p) <= 10.0) best = std::max(best, 2.0);
            if (best >= 0) oracle[static_cast<std::size_t>(best / 0.5)] += pop.at(r, c);
        }
    ASSERT_EQ(h.counts.size(), oracle.size());
    for (std::size_t n = 0; n < oracle.size(); ++n) EXPECT_EQ(h.counts[n], oracle[n]);

    const auto per = exposure_histogram(sites, profiles, pop, 10.0, 0.5, Dedup::per_site);
    EXPECT_GT(per.total, h.total);
    EXPECT_EQ(per.counts[4], h.counts[4]);
}

TEST(Histogram, SkipsUndefinedProfilesAndNegativeDeltas) {
    const Grid pop(GridSpec{40, 40, 10.0, 45.0, 0.01}, 1.0);
    const std::vector<SiteRecord> sites{{"a", {45.2, 10.15}, Month{}, ""}, {"b", {45.2, 10.25}, Month{}, ""}};
    const auto h = exposure_histogram(sites, {flat_profile(-0.5), two_ring_profile(kNoData, kNoData)}, pop);
    EXPECT_EQ(h.skipped_sites, 1u);
    EXPECT_EQ(h.total, 0.0);
    EXPECT_GT(h.below_zero, 0.0);
    EXPECT_EQ(code_of([&] { exposure_histogram(sites, {flat_profile(1), flat_profile(1), flat_profile(1)}, pop); }),
              ErrorCode::usage);
}

TEST(TotalAffected, SuffixSums) {
    ExposureHistogram h;
    h.bin_width = 0.5;
    h.counts = {10, 20, 30, 40};
    EXPECT_EQ(total_affected(h), 100.0);
    EXPECT_EQ(total_affected(h, 1.0), 70.0);
    EXPECT_EQ(total_affected(h, 1.5), 40.0);
    EXPECT_EQ(total_affected(h, 2.5), 0.0);
}

TEST(Dedup, Parse) {
    EXPECT_EQ(parse_dedup("max"), Dedup::max);
    EXPECT_EQ(parse_dedup("per-site"), Dedup::per_site);
    EXPECT_EQ(code_of([] { parse_dedup("sum"); }), ErrorCode::validation);
}
