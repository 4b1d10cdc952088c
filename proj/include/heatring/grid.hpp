#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "heatring/error.hpp"

namespace heatring {

/// Internal NODATA marker. File sentinels are normalised to NaN on load and
/// restored on write.
inline constexpr double kNoData = std::numeric_limits<double>::quiet_NaN();

inline bool is_valid(double v) { return !std::isnan(v); }

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

inline bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat_deg) && std::isfinite(p.lon_deg) && p.lat_deg >= -90.0 && p.lat_deg <= 90.0 &&
           p.lon_deg >= -180.0 && p.lon_deg < 180.0;
}

/// Geometry of a north-up lat/lon raster. Row 0 is the northernmost row.
struct GridSpec {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double xll_deg = 0.0;
    double yll_deg = 0.0;
    double cellsize_deg = 0.005;
    double nodata = -9999.0;

    std::size_t cell_count() const { return ncols * nrows; }
    std::size_t flat(std::size_t row, std::size_t col) const { return row * ncols + col; }
    double north_deg() const { return yll_deg + static_cast<double>(nrows) * cellsize_deg; }
    double east_deg() const { return xll_deg + static_cast<double>(ncols) * cellsize_deg; }

    void validate() const {
        if (ncols == 0 || nrows == 0) throw Error(ErrorCode::validation, "grid must have ncols > 0 and nrows > 0");
        if (!(cellsize_deg > 0.0) || !std::isfinite(cellsize_deg))
            throw Error(ErrorCode::validation, "grid cellsize must be a positive finite number");
        if (!std::isfinite(nodata)) throw Error(ErrorCode::validation, "grid nodata sentinel must be finite");
        if (!std::isfinite(xll_deg) || !std::isfinite(yll_deg) || yll_deg < -90.0 || north_deg() > 90.0 + 1e-9 ||
            xll_deg < -180.0 || east_deg() > 180.0 + 1e-9)
            throw Error(ErrorCode::validation, "grid extent leaves the valid lat/lon range");
    }
};

/// Same raster geometry (the NODATA sentinel is not part of the geometry).
inline bool same_geometry(const GridSpec& a, const GridSpec& b) {
    const double tol = 1e-9 * std::max(a.cellsize_deg, b.cellsize_deg);
    return a.ncols == b.ncols && a.nrows == b.nrows && std::abs(a.xll_deg - b.xll_deg) <= tol &&
           std::abs(a.yll_deg - b.yll_deg) <= tol && std::abs(a.cellsize_deg - b.cellsize_deg) <= tol;
}

/// A single raster layer; NODATA cells hold kNoData.
struct Grid {
    GridSpec spec;
    std::vector<double> values;

    Grid() = default;
    explicit Grid(const GridSpec& s, double fill = 0.0) : spec(s), values(s.cell_count(), fill) {}

    double& at(std::size_t row, std::size_t col) { return values[spec.flat(row, col)]; }
    double at(std::size_t row, std::size_t col) const { return values[spec.flat(row, col)]; }
};

inline GeoPoint cell_center(const GridSpec& spec, std::size_t row, std::size_t col) {
    if (row >= spec.nrows || col >= spec.ncols)
        throw Error(ErrorCode::index, "cell (" + std::to_string(row) + ", " + std::to_string(col) +
                                          ") outside a " + std::to_string(spec.nrows) + "x" +
                                          std::to_string(spec.ncols) + " grid");
    return {spec.yll_deg + (static_cast<double>(spec.nrows - row) - 0.5) * spec.cellsize_deg,
            spec.xll_deg + (static_cast<double>(col) + 0.5) * spec.cellsize_deg};
}

/// Cell containing a point, or nullopt if it lies outside the grid.
inline std::optional<std::pair<std::size_t, std::size_t>> locate(const GridSpec& spec, const GeoPoint& p) {
    const double fc = std::floor((p.lon_deg - spec.xll_deg) / spec.cellsize_deg);
    const double fr = std::floor((p.lat_deg - spec.yll_deg) / spec.cellsize_deg);
    if (fc < 0 || fr < 0 || fc >= static_cast<double>(spec.ncols) || fr >= static_cast<double>(spec.nrows))
        return std::nullopt;
    return std::pair{spec.nrows - 1 - static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)};
}

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double dphi = std::abs(b.lat_deg - a.lat_deg) * rad;
    const double dlam = std::abs(b.lon_deg - a.lon_deg) * rad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(a.lat_deg * rad) * std::cos(b.lat_deg * rad) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Spherical area of the cells in one row.
inline double cell_area_km2(const GridSpec& spec, std::size_t row) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double south = spec.yll_deg + static_cast<double>(spec.nrows - row - 1) * spec.cellsize_deg;
    const double north = south + spec.cellsize_deg;
    return kEarthRadiusKm * kEarthRadiusKm * spec.cellsize_deg * rad *
           (std::sin(north * rad) - std::sin(south * rad));
}

struct CellHit {
    std::size_t row = 0;
    std::size_t col = 0;
    double distance_km = 0.0;

    friend bool operator==(const CellHit&, const CellHit&) = default;
};

inline bool hit_order(const CellHit& a, const CellHit& b) {
    if (a.distance_km != b.distance_km) return a.distance_km < b.distance_km;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
}

struct DiskCells {
    std::vector<CellHit> cells;
    /// Fraction of the disk (counted in cell centres of the grid lattice
    /// extended beyond its edges) that falls inside the grid.
    double coverage = 1.0;
};

namespace detail {

// Signed row/col index range of the lattice that can hold cell centres
// within r_km of center, with one cell of margin.
struct LatticeWindow {
    long row_lo, row_hi, col_lo, col_hi;
};

inline LatticeWindow lattice_window(const GridSpec& spec, const GeoPoint& center, double r_km) {
    constexpr double deg = 180.0 / std::numbers::pi;
    const double ang = r_km / kEarthRadiusKm;
    const double dlat = ang * deg;
    const double cs = spec.cellsize_deg;
    const double lat_rad = center.lat_deg / deg;
    double dlon = 180.0;
    if (ang + std::abs(lat_rad) < std::numbers::pi / 2.0) dlon = std::asin(std::sin(ang) / std::cos(lat_rad)) * deg;

    const double n = static_cast<double>(spec.nrows);
    // row r has centre latitude yll + (nrows - r - 0.5) cs
    const double row_lo = std::floor(n - 0.5 - (center.lat_deg + dlat - spec.yll_deg) / cs) - 1;
    const double row_hi = std::ceil(n - 0.5 - (center.lat_deg - dlat - spec.yll_deg) / cs) + 1;
    const double col_lo = std::floor((center.lon_deg - dlon - spec.xll_deg) / cs - 0.5) - 1;
    const double col_hi = std::ceil((center.lon_deg + dlon - spec.xll_deg) / cs - 0.5) + 1;
    return {static_cast<long>(row_lo), static_cast<long>(row_hi), static_cast<long>(col_lo),
            static_cast<long>(col_hi)};
}

} // namespace detail

/// All cells whose centre lies within r_km (inclusive) of center, ordered by
/// (distance, row, col). Disks crossing the grid edge are truncated and the
/// coverage fraction reports how much of the disk survived.
inline DiskCells cells_within_radius(const GridSpec& spec, const GeoPoint& center, double r_km) {
    if (!(r_km >= 0.0)) throw Error(ErrorCode::out_of_range, "radius must be >= 0");
    DiskCells out;
    const auto win = detail::lattice_window(spec, center, r_km);
    const double cs = spec.cellsize_deg;
    const long nrows = static_cast<long>(spec.nrows);
    const long ncols = static_cast<long>(spec.ncols);
    std::size_t lattice_hits = 0;
    for (long r = win.row_lo; r <= win.row_hi; ++r) {
        const double lat = spec.yll_deg + (static_cast<double>(nrows - r) - 0.5) * cs;
        if (lat < -90.0 || lat > 90.0) continue;
        const bool row_inside = r >= 0 && r < nrows;
        for (long c = win.col_lo; c <= win.col_hi; ++c) {
            const bool inside = row_inside && c >= 0 && c < ncols;
            const GeoPoint p{lat, spec.xll_deg + (static_cast<double>(c) + 0.5) * cs};
            const double d = haversine_km(center, p);
            if (d > r_km) continue;
            ++lattice_hits;
            if (inside) out.cells.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c), d});
        }
    }
    std::sort(out.cells.begin(), out.cells.end(), hit_order);
    if (lattice_hits > 0)
        out.coverage = static_cast<double>(out.cells.size()) / static_cast<double>(lattice_hits);
    else
        out.coverage = locate(spec, center) ? 1.0 : 0.0;
    return out;
}

/// Concentric annuli around a centre: ring n holds distances [n*dr, (n+1)*dr),
/// except that the outermost ring is closed at r_max.
struct RingSpec {
    GeoPoint center;
    double r_max_km = 10.0;
    double dr_km = 1.0;

    void validate() const {
        if (!is_valid(center)) throw Error(ErrorCode::out_of_range, "ring centre outside the lat/lon range");
        if (!(r_max_km > 0.0) || !std::isfinite(r_max_km))
            throw Error(ErrorCode::out_of_range, "r_max_km must be positive");
        if (!(dr_km > 0.0) || !std::isfinite(dr_km)) throw Error(ErrorCode::out_of_range, "dr_km must be positive");
    }

    std::size_t ring_count() const {
        return static_cast<std::size_t>(std::max(1.0, std::ceil(r_max_km / dr_km - 1e-9)));
    }

    std::size_t ring_of(double distance_km) const {
        const double n = std::floor(distance_km / dr_km);
        return std::min(static_cast<std::size_t>(std::max(0.0, n)), ring_count() - 1);
    }

    double inner_km(std::size_t n) const { return static_cast<double>(n) * dr_km; }
    double outer_km(std::size_t n) const { return std::min(r_max_km, static_cast<double>(n + 1) * dr_km); }
    double mid_km(std::size_t n) const { return 0.5 * (inner_km(n) + outer_km(n)); }
};

struct RingPartition {
    RingSpec spec;
    std::vector<std::vector<CellHit>> rings;
    double coverage = 1.0;
};

inline RingPartition ring_partition(const GridSpec& grid, const RingSpec& ring) {
    ring.validate();
    RingPartition out{ring, std::vector<std::vector<CellHit>>(ring.ring_count()), 1.0};
    auto disk = cells_within_radius(grid, ring.center, ring.r_max_km);
    out.coverage = disk.coverage;
    // disk cells are already in (distance, row, col) order, so each ring is too
    for (const auto& hit : disk.cells) out.rings[ring.ring_of(hit.distance_km)].push_back(hit);
    return out;
}

} // namespace heatring
