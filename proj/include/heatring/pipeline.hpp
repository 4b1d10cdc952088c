#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatring/anomaly.hpp"
#include "heatring/ascii_grid.hpp"
#include "heatring/error.hpp"
#include "heatring/exposure.hpp"
#include "heatring/format.hpp"
#include "heatring/preprocess.hpp"
#include "heatring/report.hpp"
#include "heatring/series.hpp"
#include "heatring/sites.hpp"
#include "heatring/stack.hpp"
#include "heatring/synth.hpp"

// End-to-end subcommands over a shared output directory:
//
//   <out>/synth/       manifest.json, lst/*.asc, sites.csv, population.asc
//   <out>/preprocess/  manifest.json, grids/*.asc, kept_sites.csv, dropped_sites.csv, summary.json
//   <out>/epoch/       band.csv, site_deltas.csv, table1.csv, table1_excluded.csv
//   <out>/radial/      profile.csv, site_deltas.csv, summary.json
//   <out>/exposure/    histogram.csv, population_1km.asc, summary.json
//   <out>/report/      epoch.svg, radial.svg, exposure.svg
//
// Every subcommand echoes its effective configuration to <out>/<cmd>/config.json.

namespace heatring {

namespace fs = std::filesystem;
using nlohmann::json;

struct PopulationSynth {
    bool enabled = true;
    double fine_cellsize_deg = 0.001;
    double rural_per_cell = 0.5;
    std::vector<UrbanCore> cores;
};

/// Sites placed at the centres of a near-square lattice covering the grid.
struct SiteLattice {
    int count = 0;
    Month onset = Month::from_ym(2020, 1);
    double amplitude_degC = 2.0;
    double sigma_km = 4.51;
};

struct RunConfig {
    fs::path output_dir = "heatring_out";
    std::optional<fs::path> stack;
    std::optional<fs::path> sites;
    std::optional<fs::path> population;

    int k = 60;
    int horizon = 10;
    double dr_km = 1.0;
    double r_max_km = 10.0;
    std::vector<int> k_list{12, 24, 36, 120};
    int min_valid_days = 8;
    int min_samples = 3;
    std::optional<MonthWindow> clim_window;
    bool deseasonalize = true;
    bool mask = true;
    MaskOptions mask_options{3.0, 0.05, 12};
    double min_valid_fraction = 0.5;
    double urban_radius_km = 5.0;
    double density_threshold = 1500.0;
    int pop_factor = 10;
    double bin_width = 0.5;
    Dedup dedup = Dedup::max;
    bool center_cell_only = false;
    BandMode band = BandMode::central95;
    double decay_fraction = 0.3;
    double decay_level_degC = 1.0;
    unsigned workers = 1;

    ScenarioParams synth;
    SiteLattice lattice;
    PopulationSynth population_synth;
};

inline RunConfig demo_config() {
    RunConfig c;
    auto& p = c.synth;
    p.spec = GridSpec{80, 80, 10.0, 45.0, 0.005, -9999.0};
    p.start = Month::from_ym(2012, 1);
    p.months = 96;
    p.seasonal_amp_degC = 5.0;
    p.trend_degC_per_month = 0.001;
    p.noise_sd_degC = 0.3;
    p.seed = 42;
    c.lattice = SiteLattice{4, Month::from_ym(2018, 1), 2.0, 4.51};
    c.population_synth.cores.push_back(UrbanCore{GeoPoint{45.3, 10.3}, 40.0, 3.0});
    return c;
}

// ---------------------------------------------------------------- config JSON

namespace detail {

template <typename T>
void read_opt(const json& obj, const char* key, T& dst, const std::string& prefix) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::validation, "config field '" + prefix + key + "' has the wrong type");
    }
}

inline GeoPoint read_point(const json& o, const std::string& where) {
    GeoPoint p;
    read_opt(o, "lat_deg", p.lat_deg, where);
    read_opt(o, "lon_deg", p.lon_deg, where);
    return p;
}

inline Month read_month(const json& o, const char* key, Month fallback, const std::string& where) {
    std::string s;
    read_opt(o, key, s, where);
    if (s.empty()) return fallback;
    try {
        return parse_month(s);
    } catch (const Error& e) {
        throw Error(ErrorCode::validation, "config field '" + where + key + "': " + e.what());
    }
}

} // namespace detail

inline RunConfig config_from_json(const json& j) {
    using detail::read_opt;
    if (!j.is_object()) throw Error(ErrorCode::validation, "config must be a JSON object");
    RunConfig c = demo_config();
    std::string s;
    read_opt(j, "output_dir", s, "");
    if (!s.empty()) c.output_dir = s;

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        for (auto [key, dst] : {std::pair{"stack", &c.stack}, {"sites", &c.sites}, {"population", &c.population}}) {
            std::string v;
            read_opt(p, key, v, "paths.");
            if (!v.empty()) *dst = fs::path(v);
        }
    }

    if (j.contains("params")) {
        const auto& p = j.at("params");
        const std::string w = "params.";
        read_opt(p, "k", c.k, w);
        read_opt(p, "horizon", c.horizon, w);
        read_opt(p, "dr_km", c.dr_km, w);
        read_opt(p, "r_max_km", c.r_max_km, w);
        read_opt(p, "k_list", c.k_list, w);
        read_opt(p, "min_valid_days", c.min_valid_days, w);
        read_opt(p, "min_samples", c.min_samples, w);
        read_opt(p, "deseasonalize", c.deseasonalize, w);
        read_opt(p, "mask", c.mask, w);
        read_opt(p, "mad_k", c.mask_options.mad_k, w);
        read_opt(p, "mad_scale_floor", c.mask_options.scale_floor, w);
        read_opt(p, "mask_half_window", c.mask_options.half_window, w);
        read_opt(p, "min_valid_fraction", c.min_valid_fraction, w);
        read_opt(p, "urban_radius_km", c.urban_radius_km, w);
        read_opt(p, "density_threshold", c.density_threshold, w);
        read_opt(p, "pop_factor", c.pop_factor, w);
        read_opt(p, "bin_width", c.bin_width, w);
        read_opt(p, "center_cell_only", c.center_cell_only, w);
        read_opt(p, "decay_fraction", c.decay_fraction, w);
        read_opt(p, "decay_level_degC", c.decay_level_degC, w);
        read_opt(p, "workers", c.workers, w);
        read_opt(p, "seed", c.synth.seed, w);
        std::string v;
        read_opt(p, "dedup", v, w);
        if (!v.empty()) c.dedup = parse_dedup(v);
        v.clear();
        read_opt(p, "band", v, w);
        if (v == "upper95")
            c.band = BandMode::upper95;
        else if (!v.empty() && v != "central95")
            throw Error(ErrorCode::validation, "config field 'params.band' must be \"central95\" or \"upper95\"");
        if (p.contains("clim_window") && !p.at("clim_window").is_null()) {
            const auto& cw = p.at("clim_window");
            if (!cw.is_object() || !cw.contains("first") || !cw.contains("last"))
                throw Error(ErrorCode::validation, "config field 'params.clim_window' needs 'first' and 'last'");
            c.clim_window = MonthWindow{detail::read_month(cw, "first", Month{}, "params.clim_window."),
                                        detail::read_month(cw, "last", Month{}, "params.clim_window.")};
        }
    }

    if (j.contains("synth")) {
        const auto& sy = j.at("synth");
        const std::string w = "synth.";
        auto& p = c.synth;
        if (sy.contains("grid")) {
            const auto& g = sy.at("grid");
            read_opt(g, "ncols", p.spec.ncols, "synth.grid.");
            read_opt(g, "nrows", p.spec.nrows, "synth.grid.");
            read_opt(g, "xllcorner", p.spec.xll_deg, "synth.grid.");
            read_opt(g, "yllcorner", p.spec.yll_deg, "synth.grid.");
            read_opt(g, "cellsize", p.spec.cellsize_deg, "synth.grid.");
            read_opt(g, "nodata", p.spec.nodata, "synth.grid.");
        }
        std::string cad;
        read_opt(sy, "cadence", cad, w);
        if (!cad.empty()) p.cadence = parse_cadence(cad);
        p.start = detail::read_month(sy, "start", p.start, w);
        read_opt(sy, "months", p.months, w);
        read_opt(sy, "base_degC", p.base_degC, w);
        read_opt(sy, "seasonal_amp_degC", p.seasonal_amp_degC, w);
        read_opt(sy, "seasonal_phase_month", p.seasonal_phase_month, w);
        read_opt(sy, "trend_degC_per_month", p.trend_degC_per_month, w);
        read_opt(sy, "noise_sd_degC", p.noise_sd_degC, w);
        read_opt(sy, "nodata_rate", p.nodata_rate, w);
        if (sy.contains("sites")) {
            c.lattice.count = 0;
            for (const auto& e : sy.at("sites")) {
                SynthSite site;
                read_opt(e, "site_id", site.site_id, "synth.sites[].");
                site.point = detail::read_point(e, "synth.sites[].");
                site.onset = detail::read_month(e, "onset", p.start, "synth.sites[].");
                read_opt(e, "amplitude_degC", site.amplitude_degC, "synth.sites[].");
                read_opt(e, "sigma_km", site.sigma_km, "synth.sites[].");
                p.sites.push_back(site);
            }
        }
        if (sy.contains("site_lattice")) {
            const auto& l = sy.at("site_lattice");
            read_opt(l, "count", c.lattice.count, "synth.site_lattice.");
            c.lattice.onset = detail::read_month(l, "onset", c.lattice.onset, "synth.site_lattice.");
            read_opt(l, "amplitude_degC", c.lattice.amplitude_degC, "synth.site_lattice.");
            read_opt(l, "sigma_km", c.lattice.sigma_km, "synth.site_lattice.");
        }
        if (sy.contains("population")) {
            const auto& pp = sy.at("population");
            if (pp.is_null()) {
                c.population_synth.enabled = false;
            } else {
                read_opt(pp, "enabled", c.population_synth.enabled, "synth.population.");
                read_opt(pp, "fine_cellsize_deg", c.population_synth.fine_cellsize_deg, "synth.population.");
                read_opt(pp, "rural_per_cell", c.population_synth.rural_per_cell, "synth.population.");
                if (pp.contains("cores")) {
                    c.population_synth.cores.clear();
                    for (const auto& e : pp.at("cores")) {
                        UrbanCore core;
                        core.center = detail::read_point(e, "synth.population.cores[].");
                        read_opt(e, "peak_per_cell", core.peak_per_cell, "synth.population.cores[].");
                        read_opt(e, "sigma_km", core.sigma_km, "synth.population.cores[].");
                        c.population_synth.cores.push_back(core);
                    }
                }
            }
        }
    }
    return c;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_input, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::validation, path.string() + ": config is not valid JSON (byte " +
                                               std::to_string(e.byte) + ")");
    }
    return config_from_json(j);
}

inline json config_to_json(const RunConfig& c) {
    json j;
    // the output location is not echoed: reruns elsewhere must match byte for byte
    j["paths"] = {{"stack", c.stack ? json(c.stack->generic_string()) : json()},
                  {"sites", c.sites ? json(c.sites->generic_string()) : json()},
                  {"population", c.population ? json(c.population->generic_string()) : json()}};
    json p;
    p["k"] = c.k;
    p["horizon"] = c.horizon;
    p["dr_km"] = c.dr_km;
    p["r_max_km"] = c.r_max_km;
    p["k_list"] = c.k_list;
    p["min_valid_days"] = c.min_valid_days;
    p["min_samples"] = c.min_samples;
    p["deseasonalize"] = c.deseasonalize;
    p["mask"] = c.mask;
    p["mad_k"] = c.mask_options.mad_k;
    p["mad_scale_floor"] = c.mask_options.scale_floor;
    p["mask_half_window"] = c.mask_options.half_window;
    p["min_valid_fraction"] = c.min_valid_fraction;
    p["urban_radius_km"] = c.urban_radius_km;
    p["density_threshold"] = c.density_threshold;
    p["pop_factor"] = c.pop_factor;
    p["bin_width"] = c.bin_width;
    p["dedup"] = std::string(to_string(c.dedup));
    p["band"] = c.band == BandMode::central95 ? "central95" : "upper95";
    p["center_cell_only"] = c.center_cell_only;
    p["decay_fraction"] = c.decay_fraction;
    p["decay_level_degC"] = c.decay_level_degC;
    p["seed"] = c.synth.seed;
    p["clim_window"] =
        c.clim_window ? json{{"first", c.clim_window->first.label()}, {"last", c.clim_window->last.label()}} : json();
    // nor is the worker count
    j["params"] = p;

    const auto& s = c.synth;
    json sy;
    sy["grid"] = {{"ncols", s.spec.ncols},       {"nrows", s.spec.nrows},
                  {"xllcorner", s.spec.xll_deg}, {"yllcorner", s.spec.yll_deg},
                  {"cellsize", s.spec.cellsize_deg}, {"nodata", s.spec.nodata}};
    sy["cadence"] = std::string(to_string(s.cadence));
    sy["start"] = s.start.label();
    sy["months"] = s.months;
    sy["base_degC"] = s.base_degC;
    sy["seasonal_amp_degC"] = s.seasonal_amp_degC;
    sy["seasonal_phase_month"] = s.seasonal_phase_month;
    sy["trend_degC_per_month"] = s.trend_degC_per_month;
    sy["noise_sd_degC"] = s.noise_sd_degC;
    sy["nodata_rate"] = s.nodata_rate;
    sy["sites"] = json::array();
    for (const auto& site : s.sites)
        sy["sites"].push_back({{"site_id", site.site_id},
                               {"lat_deg", site.point.lat_deg},
                               {"lon_deg", site.point.lon_deg},
                               {"onset", site.onset.label()},
                               {"amplitude_degC", site.amplitude_degC},
                               {"sigma_km", site.sigma_km}});
    sy["site_lattice"] = {{"count", c.lattice.count},
                          {"onset", c.lattice.onset.label()},
                          {"amplitude_degC", c.lattice.amplitude_degC},
                          {"sigma_km", c.lattice.sigma_km}};
    json cores = json::array();
    for (const auto& core : c.population_synth.cores)
        cores.push_back({{"lat_deg", core.center.lat_deg},
                         {"lon_deg", core.center.lon_deg},
                         {"peak_per_cell", core.peak_per_cell},
                         {"sigma_km", core.sigma_km}});
    sy["population"] = {{"enabled", c.population_synth.enabled},
                        {"fine_cellsize_deg", c.population_synth.fine_cellsize_deg},
                        {"rural_per_cell", c.population_synth.rural_per_cell},
                        {"cores", cores}};
    j["synth"] = sy;
    return j;
}

/// Checks parameter ranges before any work starts.
inline void validate_config(const RunConfig& c) {
    auto fail = [](const std::string& field, const std::string& what) {
        throw Error(ErrorCode::validation, "config field '" + field + "' " + what);
    };
    if (c.k < 1) fail("params.k", "must be >= 1");
    if (c.horizon < 0) fail("params.horizon", "must be >= 0");
    if (!(c.dr_km > 0)) fail("params.dr_km", "must be > 0");
    if (!(c.r_max_km > 0)) fail("params.r_max_km", "must be > 0");
    if (c.k_list.empty()) fail("params.k_list", "must not be empty");
    for (int k : c.k_list)
        if (k < 1) fail("params.k_list", "entries must be >= 1");
    if (c.min_valid_days < 1) fail("params.min_valid_days", "must be >= 1");
    if (c.min_samples < 1) fail("params.min_samples", "must be >= 1");
    if (!(c.mask_options.mad_k > 0)) fail("params.mad_k", "must be > 0");
    if (!(c.mask_options.scale_floor >= 0)) fail("params.mad_scale_floor", "must be >= 0");
    if (c.mask_options.half_window < 0) fail("params.mask_half_window", "must be >= 0");
    if (!(c.min_valid_fraction >= 0 && c.min_valid_fraction <= 1)) fail("params.min_valid_fraction", "must be in [0, 1]");
    if (!(c.urban_radius_km > 0)) fail("params.urban_radius_km", "must be > 0");
    if (!(c.density_threshold >= 0)) fail("params.density_threshold", "must be >= 0");
    if (c.pop_factor < 1) fail("params.pop_factor", "must be >= 1");
    if (!(c.bin_width > 0)) fail("params.bin_width", "must be > 0");
    if (!(c.decay_fraction > 0 && c.decay_fraction < 1)) fail("params.decay_fraction", "must be in (0, 1)");
    if (c.workers < 1 || c.workers > 256) fail("params.workers", "must be in [1, 256]");
}

// ------------------------------------------------------------------- file I/O

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write " + path.string());
    out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void require_input(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path))
        throw Error(ErrorCode::missing_input, "missing input " + path.string() + " (" + hint + ")");
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_input, "cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (!trim(line).empty()) rows.push_back(split_csv(line));
    }
    return rows;
}

inline double csv_number(const std::string& s) {
    if (s == "NaN") return kNoData;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw Error(ErrorCode::parse, "result file holds non-numeric value '" + s + "'");
    return v;
}

inline json num_or_null(double v) { return is_valid(v) ? json(round_sig(v)) : json(); }

inline std::string sig(double v) { return format_sig(v, 9); }

inline fs::path output_dir(const RunConfig& c) { return c.output_dir; }

inline std::vector<SiteRecord> sorted_sites(std::vector<SiteRecord> s) {
    std::sort(s.begin(), s.end(), [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });
    return s;
}

} // namespace detail

/// Lattice positions (cell-of-lattice centres) for `count` sites.
inline std::vector<SynthSite> lattice_sites(const GridSpec& spec, const SiteLattice& l) {
    std::vector<SynthSite> out;
    if (l.count <= 0) return out;
    const double w = static_cast<double>(spec.ncols) * spec.cellsize_deg;
    const double h = static_cast<double>(spec.nrows) * spec.cellsize_deg;
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(l.count * w / h))));
    const int rows = (l.count + cols - 1) / cols;
    for (int i = 0; i < l.count; ++i) {
        const int r = i / cols, c = i % cols;
        char id[32];
        std::snprintf(id, sizeof id, "S%03d", i + 1);
        out.push_back({id,
                       GeoPoint{spec.north_deg() - (r + 0.5) * h / rows, spec.xll_deg + (c + 0.5) * w / cols},
                       l.onset, l.amplitude_degC, l.sigma_km});
    }
    return out;
}

/// The scenario a config describes: explicit sites followed by lattice sites.
inline ScenarioParams scenario_params(const RunConfig& c) {
    ScenarioParams p = c.synth;
    for (auto& s : lattice_sites(p.spec, c.lattice)) p.sites.push_back(std::move(s));
    return p;
}

// ---------------------------------------------------------------- subcommands

inline void run_synth(const RunConfig& c) {
    validate_config(c);
    const auto dir = detail::output_dir(c) / "synth";
    const auto params = scenario_params(c);
    const auto scenario = generate(params, c.workers);
    write_stack(dir / "manifest.json", scenario.stack, "lst", c.workers);
    write_sites(dir / "sites.csv", scenario.sites);
    if (c.population_synth.enabled) {
        PopulationParams pp;
        pp.seed = params.seed;
        pp.rural_per_cell = c.population_synth.rural_per_cell;
        pp.cores = c.population_synth.cores;
        const double fcs = c.population_synth.fine_cellsize_deg;
        const auto f = static_cast<std::size_t>(c.pop_factor);
        auto cells = [&](double extent) {
            const auto n = static_cast<std::size_t>(std::floor(extent / fcs + 1e-9));
            return n - n % f;
        };
        pp.spec = GridSpec{cells(static_cast<double>(params.spec.ncols) * params.spec.cellsize_deg),
                           cells(static_cast<double>(params.spec.nrows) * params.spec.cellsize_deg),
                           params.spec.xll_deg, params.spec.yll_deg, fcs, -9999.0};
        write_grid(dir / "population.asc", generate_population(pp));
    }
    detail::write_json(dir / "config.json", config_to_json(c));
}

struct PreprocessOutcome {
    RasterStack anomalies;
    std::vector<SiteRecord> kept;
    std::size_t masked = 0;
};

/// The cleaning chain on in-memory inputs; `population_1km` may be null.
inline PreprocessOutcome preprocess_stack(const RunConfig& c, RasterStack stack, const std::vector<SiteRecord>& sites,
                                          const Grid* population_1km, std::vector<ExcludedSite>* dropped = nullptr,
                                          std::vector<SiteValidity>* drop_diag = nullptr) {
    if (stack.cadence == Cadence::daily) stack = monthly_from_daily(stack, c.min_valid_days, c.workers);
    auto ordered = detail::sorted_sites(sites);

    PreprocessOutcome out;
    if (c.deseasonalize) {
        MonthWindow window;
        if (c.clim_window) {
            window = *c.clim_window;
        } else {
            const auto months = stack_months(stack);
            Month earliest = months.back();
            for (const auto& s : ordered) earliest = std::min(earliest, s.start_of_operations);
            window = MonthWindow{months.front(), std::min(months.back(), earliest - 1)};
        }
        if (window.last - window.first + 1 < 12 * c.min_samples)
            throw Error(ErrorCode::insufficient_history,
                        "climatology window " + window.first.label() + ".." + window.last.label() +
                            " is shorter than min_samples=" + std::to_string(c.min_samples) + " years");
        const auto clim = climatology(stack, window, c.min_samples, c.workers);
        stack = deseasonalize(stack, clim, c.workers);
        stack.variable += "_anomaly";
    }
    if (c.mask) {
        auto masked = mask_outliers(stack, c.mask_options, c.workers);
        stack = std::move(masked.stack);
        out.masked = masked.masked;
    }

    if (population_1km) {
        auto uf = urban_filter(ordered, *population_1km, c.urban_radius_km, c.density_threshold);
        if (dropped)
            for (auto& e : uf.excluded) dropped->push_back(e);
        if (drop_diag)
            for (std::size_t i = 0; i < uf.excluded.size(); ++i) drop_diag->push_back({false, uf.excluded[i].reason, 0.0});
        ordered = std::move(uf.kept);
    }

    std::vector<SiteValidity> validity(ordered.size());
    parallel_for(ordered.size(), c.workers, [&](std::size_t i) {
        const auto cells = origin_cells(stack.spec, ordered[i].point, c.dr_km, c.center_cell_only);
        if (cells.empty()) {
            validity[i] = {false, kReasonEmptyRing, 0.0};
            return;
        }
        const auto rs = ring_series(stack, cells, ordered[i].site_id, 0.0);
        validity[i] = site_validity(rs.values, ordered[i].start_of_operations, c.k, c.horizon, c.min_valid_fraction);
    });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (validity[i].keep) {
            out.kept.push_back(ordered[i]);
        } else {
            if (dropped) dropped->push_back({ordered[i], validity[i].reason, kNoData});
            if (drop_diag) drop_diag->push_back(validity[i]);
        }
    }
    out.anomalies = std::move(stack);
    return out;
}

inline Grid load_population_1km(const RunConfig& c, const fs::path& path, std::size_t* nodata = nullptr) {
    auto fine = load_grid(path);
    auto coarse = coarsen_population(fine, static_cast<std::size_t>(c.pop_factor));
    if (nodata) *nodata = coarse.nodata_cells;
    return coarse.coarse;
}

inline fs::path default_population(const RunConfig& c) {
    return c.population ? *c.population : detail::output_dir(c) / "synth" / "population.asc";
}

inline void run_preprocess(const RunConfig& c) {
    validate_config(c);
    const auto out_dir = detail::output_dir(c);
    const auto stack_path = c.stack ? *c.stack : out_dir / "synth" / "manifest.json";
    const auto sites_path = c.sites ? *c.sites : out_dir / "synth" / "sites.csv";
    detail::require_input(stack_path, "stack manifest; run synth or set paths.stack");
    detail::require_input(sites_path, "site registry; run synth or set paths.sites");
    const auto pop_path = default_population(c);
    if (c.population) detail::require_input(pop_path, "population grid");

    auto stack = load_stack(stack_path, c.workers);
    const auto sites = load_sites(sites_path);
    std::optional<Grid> pop;
    std::size_t pop_nodata = 0;
    if (fs::exists(pop_path)) pop = load_population_1km(c, pop_path, &pop_nodata);

    std::vector<ExcludedSite> dropped;
    std::vector<SiteValidity> diag;
    auto res = preprocess_stack(c, std::move(stack), sites, pop ? &*pop : nullptr, &dropped, &diag);

    const auto dir = out_dir / "preprocess";
    write_stack(dir / "manifest.json", res.anomalies, "grids", c.workers);
    write_sites(dir / "kept_sites.csv", res.kept);
    std::string csv = "site_id,reason_code,valid_fraction\n";
    for (std::size_t i = 0; i < dropped.size(); ++i)
        csv += detail::csv_escape(dropped[i].site.site_id) + "," + diag[i].reason + "," +
               detail::sig(diag[i].valid_fraction) + "\n";
    detail::write_text(dir / "dropped_sites.csv", csv);
    json summary;
    summary["sites_in"] = sites.size();
    summary["sites_kept"] = res.kept.size();
    summary["sites_dropped"] = dropped.size();
    summary["masked_values"] = res.masked;
    summary["population_nodata_cells"] = pop_nodata;
    summary["urban_filter_applied"] = pop.has_value();
    summary["periods"] = res.anomalies.size();
    detail::write_json(dir / "summary.json", summary);
    detail::write_json(dir / "config.json", config_to_json(c));
}

struct PreprocessedInputs {
    RasterStack anomalies;
    std::vector<SiteRecord> sites;
};

inline PreprocessedInputs load_preprocessed(const RunConfig& c) {
    const auto dir = detail::output_dir(c) / "preprocess";
    detail::require_input(dir / "manifest.json", "run preprocess first");
    detail::require_input(dir / "kept_sites.csv", "run preprocess first");
    PreprocessedInputs in{load_stack(dir / "manifest.json", c.workers), load_sites(dir / "kept_sites.csv")};
    in.sites = detail::sorted_sites(std::move(in.sites));
    if (in.sites.empty()) throw Error(ErrorCode::insufficient_history, "no site survived preprocessing");
    return in;
}

struct EpochOutcome {
    std::vector<EpochDeltaSeries> series;
    AggregateBand band;
    std::vector<SweepRow> sweep;
};

inline EpochOutcome epoch_analysis(const RunConfig& c, const RasterStack& anom, const std::vector<SiteRecord>& sites) {
    EpochOutcome out;
    std::vector<SiteSeries> origin(sites.size());
    out.series.resize(sites.size());
    parallel_for(sites.size(), c.workers, [&](std::size_t i) {
        const auto cells = origin_cells(anom.spec, sites[i].point, c.dr_km, c.center_cell_only);
        if (cells.empty())
            throw Error(ErrorCode::empty_ring, "site '" + sites[i].site_id + "' has no origin cells");
        auto rs = ring_series(anom, cells, sites[i].site_id, 0.0);
        out.series[i] = epoch_delta_series(rs.values, sites[i].start_of_operations, c.k, c.horizon,
                                           c.min_valid_fraction, sites[i].site_id);
        origin[i] = SiteSeries{sites[i].site_id, sites[i].start_of_operations, std::move(rs.values)};
    });
    out.band = aggregate_sites(out.series, c.band);
    out.sweep = table_sweep(origin, c.k_list, c.min_valid_fraction);
    return out;
}

inline void run_epoch(const RunConfig& c) {
    validate_config(c);
    const auto in = load_preprocessed(c);
    const auto res = epoch_analysis(c, in.anomalies, in.sites);
    if (std::none_of(res.series.begin(), res.series.end(), [](const EpochDeltaSeries& s) {
            return std::any_of(s.deltas.begin(), s.deltas.end(), [](double d) { return is_valid(d); });
        }))
        throw Error(ErrorCode::insufficient_history, "no site has enough history for k=" + std::to_string(c.k));

    const auto dir = detail::output_dir(c) / "epoch";
    using detail::sig;
    std::string band = c.band == BandMode::central95 ? "i,mean,min,max,p2.5,p97.5,n_sites\n"
                                                     : "i,mean,min,max,p0,p95,n_sites\n";
    for (int i = -c.horizon; i <= c.horizon; ++i) {
        const auto& r = res.band.at(i);
        band += std::to_string(i) + "," + sig(r.mean) + "," + sig(r.min) + "," + sig(r.max) + "," + sig(r.lo) + "," +
                sig(r.hi) + "," + std::to_string(r.n) + "\n";
    }
    detail::write_text(dir / "band.csv", band);

    std::string per_site = "site_id,i,delta\n";
    for (const auto& s : res.series)
        for (int i = -c.horizon; i <= c.horizon; ++i)
            per_site += detail::csv_escape(s.site_id) + "," + std::to_string(i) + "," + sig(s.at(i)) + "\n";
    detail::write_text(dir / "site_deltas.csv", per_site);

    std::string table = "k,average,minimum,maximum\n";
    std::string excluded = "k,site_id\n";
    for (const auto& row : res.sweep) {
        table += std::to_string(row.k) + "," + sig(row.average) + "," + sig(row.minimum) + "," + sig(row.maximum) + "\n";
        for (const auto& id : row.excluded) excluded += std::to_string(row.k) + "," + detail::csv_escape(id) + "\n";
    }
    detail::write_text(dir / "table1.csv", table);
    detail::write_text(dir / "table1_excluded.csv", excluded);
    detail::write_json(dir / "config.json", config_to_json(c));
}

inline json decay_json(const RadialProfile& profile, const RunConfig& c) {
    json d;
    d["fraction"] = c.decay_fraction;
    d["abs_level_degC"] = c.decay_level_degC;
    try {
        const auto m = decay_metrics(profile, c.decay_fraction, c.decay_level_degC);
        d["status"] = "ok";
        d["peak_degC"] = round_sig(m.peak);
        d["fraction_km"] = m.fraction_km ? json(round_sig(*m.fraction_km)) : json("beyond-range");
        d["abs_level_km"] = m.level_km ? json(round_sig(*m.level_km)) : json("beyond-range");
    } catch (const Error& e) {
        if (e.code() != ErrorCode::undefined_metrics) throw;
        d["status"] = "undefined-metrics";
    }
    return d;
}

inline void run_radial(const RunConfig& c) {
    validate_config(c);
    const auto in = load_preprocessed(c);
    const auto res = radial_profile(in.anomalies, in.sites, c.r_max_km, c.dr_km, c.k, c.min_valid_fraction, c.band,
                                    c.workers);
    const auto dir = detail::output_dir(c) / "radial";
    using detail::sig;
    std::string prof = c.band == BandMode::central95 ? "r_mid_km,mean,min,max,p2.5,p97.5,n_sites\n"
                                                     : "r_mid_km,mean,min,max,p0,p95,n_sites\n";
    for (const auto& r : res.profile.rings)
        prof += sig(r.r_mid_km) + "," + sig(r.stats.mean) + "," + sig(r.stats.min) + "," + sig(r.stats.max) + "," +
                sig(r.stats.lo) + "," + sig(r.stats.hi) + "," + std::to_string(r.stats.n) + "\n";
    detail::write_text(dir / "profile.csv", prof);

    std::string per_site = "site_id,ring,r_mid_km,delta\n";
    for (std::size_t s = 0; s < in.sites.size(); ++s)
        for (std::size_t n = 0; n < res.site_deltas[s].size(); ++n)
            per_site += detail::csv_escape(in.sites[s].site_id) + "," + std::to_string(n) + "," +
                        sig(res.profile.rings[n].r_mid_km) + "," + sig(res.site_deltas[s][n]) + "\n";
    detail::write_text(dir / "site_deltas.csv", per_site);

    json summary;
    summary["k"] = c.k;
    summary["dr_km"] = c.dr_km;
    summary["r_max_km"] = c.r_max_km;
    summary["n_sites"] = in.sites.size();
    summary["decay"] = decay_json(res.profile, c);
    detail::write_json(dir / "summary.json", summary);
    detail::write_json(dir / "config.json", config_to_json(c));
}

inline void run_exposure(const RunConfig& c) {
    validate_config(c);
    const auto out_dir = detail::output_dir(c);
    const auto deltas_path = out_dir / "radial" / "site_deltas.csv";
    const auto sites_path = out_dir / "preprocess" / "kept_sites.csv";
    const auto pop_path = default_population(c);
    detail::require_input(deltas_path, "run radial first");
    detail::require_input(sites_path, "run preprocess first");
    detail::require_input(pop_path, "population grid; run synth or set paths.population");

    const auto sites = detail::sorted_sites(load_sites(sites_path));
    std::map<std::string, std::vector<double>> by_site;
    for (const auto& row : detail::read_csv(deltas_path)) {
        if (row.size() < 4) throw Error(ErrorCode::parse, deltas_path.string() + ": malformed row");
        auto& v = by_site[row[0]];
        const auto n = static_cast<std::size_t>(std::stoul(row[1]));
        if (v.size() <= n) v.resize(n + 1, kNoData);
        v[n] = detail::csv_number(row[3]);
    }
    std::vector<RadialProfile> profiles;
    for (const auto& s : sites) {
        const auto it = by_site.find(s.site_id);
        profiles.push_back(profile_from_deltas({it == by_site.end() ? std::vector<double>{} : it->second},
                                               c.r_max_km, c.dr_km));
    }
    std::size_t nodata = 0;
    const auto pop = load_population_1km(c, pop_path, &nodata);
    const auto h = exposure_histogram(sites, profiles, pop, c.r_max_km, c.bin_width, c.dedup, c.workers);

    const auto dir = out_dir / "exposure";
    std::string csv = "bin_lo_degC,bin_hi_degC,population\n";
    for (std::size_t n = 0; n < h.counts.size(); ++n)
        csv += detail::sig(h.bin_lo(n)) + "," + detail::sig(h.bin_hi(n)) + "," + detail::sig(h.counts[n]) + "\n";
    detail::write_text(dir / "histogram.csv", csv);
    write_grid(dir / "population_1km.asc", pop);
    json summary;
    summary["total_affected"] = round_sig(total_affected(h));
    summary["dedup"] = std::string(to_string(h.dedup));
    summary["r_max_km"] = c.r_max_km;
    summary["bin_width"] = c.bin_width;
    summary["below_zero_population"] = round_sig(h.below_zero);
    summary["covered_cells"] = h.covered_cells;
    summary["skipped_sites"] = h.skipped_sites;
    summary["population_nodata_cells"] = nodata;
    detail::write_json(dir / "summary.json", summary);
    detail::write_json(dir / "config.json", config_to_json(c));
}

inline void run_report(const RunConfig& c) {
    validate_config(c);
    const auto out_dir = detail::output_dir(c);
    const auto band_path = out_dir / "epoch" / "band.csv";
    const auto prof_path = out_dir / "radial" / "profile.csv";
    const auto hist_path = out_dir / "exposure" / "histogram.csv";
    detail::require_input(band_path, "run epoch first");
    detail::require_input(prof_path, "run radial first");
    detail::require_input(hist_path, "run exposure first");

    auto band_points = [](const fs::path& p) {
        std::vector<svg::BandPoint> pts;
        for (const auto& r : detail::read_csv(p)) {
            if (r.size() < 6) throw Error(ErrorCode::parse, p.string() + ": malformed row");
            pts.push_back({detail::csv_number(r[0]), detail::csv_number(r[1]), detail::csv_number(r[2]),
                           detail::csv_number(r[3]), detail::csv_number(r[4]), detail::csv_number(r[5])});
        }
        return pts;
    };
    std::vector<svg::Bar> bars;
    for (const auto& r : detail::read_csv(hist_path)) {
        if (r.size() < 3) throw Error(ErrorCode::parse, hist_path.string() + ": malformed row");
        bars.push_back({detail::csv_number(r[0]), detail::csv_number(r[1]), detail::csv_number(r[2])});
    }
    const auto dir = out_dir / "report";
    detail::write_text(dir / "epoch.svg", svg::band_chart(band_points(band_path), "LST increase around start of operations",
                                                          "months from start of operations (i)", "delta LST (degC)"));
    detail::write_text(dir / "radial.svg", svg::band_chart(band_points(prof_path), "LST increase vs distance",
                                                           "distance from site (km)", "delta LST (degC)"));
    detail::write_text(dir / "exposure.svg", svg::bar_chart(bars, "Population by experienced LST increase",
                                                            "LST increase (degC)", "population"));
    detail::write_json(dir / "config.json", config_to_json(c));
}

/// Exit status for a library error: 2 missing input, 3 validation failure,
/// 4 insufficient history, 1 anything else.
inline int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::missing_file:
    case ErrorCode::missing_input: return 2;
    case ErrorCode::insufficient_history: return 4;
    case ErrorCode::parse:
    case ErrorCode::spec_mismatch:
    case ErrorCode::timeline_order:
    case ErrorCode::timeline_gap:
    case ErrorCode::duplicate_site:
    case ErrorCode::bad_date:
    case ErrorCode::out_of_range:
    case ErrorCode::usage:
    case ErrorCode::validation:
    case ErrorCode::empty_window:
    case ErrorCode::not_divisible: return 3;
    default: return 1;
    }
}

inline std::string error_json(ErrorCode code, const std::string& message) {
    json j;
    j["error"] = {{"code", std::string(to_string(code))}, {"exit_code", exit_code_for(code)}, {"message", message}};
    return j.dump();
}

} // namespace heatring
