#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatring/ascii_grid.hpp"
#include "heatring/error.hpp"
#include "heatring/grid.hpp"
#include "heatring/parallel.hpp"
#include "heatring/time.hpp"

namespace heatring {

/// An ordered sequence of co-registered value layers (monthly or daily).
struct RasterStack {
    std::string variable = "LST";
    std::string units = "degC";
    Cadence cadence = Cadence::monthly;
    bool gaps_allowed = false;
    GridSpec spec;
    std::vector<std::string> timeline;
    std::vector<std::vector<double>> layers;

    std::size_t size() const { return layers.size(); }

    Grid layer_grid(std::size_t t) const {
        Grid g;
        g.spec = spec;
        g.values = layers.at(t);
        return g;
    }
};

/// Checks ordering (strictly increasing, no duplicates) and, unless gaps are
/// allowed, contiguity of a timeline of period labels.
inline void validate_timeline(const std::vector<std::string>& labels, Cadence cadence, bool gaps_allowed) {
    if (labels.empty()) throw Error(ErrorCode::validation, "timeline is empty");
    for (const auto& l : labels) period_month(l, cadence);
    for (std::size_t i = 1; i < labels.size(); ++i) {
        bool ordered = false;
        bool contiguous = false;
        if (cadence == Cadence::monthly) {
            const auto a = parse_month(labels[i - 1]);
            const auto b = parse_month(labels[i]);
            ordered = a < b;
            contiguous = b - a == 1;
        } else {
            const auto a = std::chrono::sys_days{parse_day(labels[i - 1])};
            const auto b = std::chrono::sys_days{parse_day(labels[i])};
            ordered = a < b;
            contiguous = (b - a).count() == 1;
        }
        if (!ordered)
            throw Error(ErrorCode::timeline_order,
                        "timeline not strictly increasing at '" + labels[i - 1] + "' -> '" + labels[i] + "'");
        if (!contiguous && !gaps_allowed)
            throw Error(ErrorCode::timeline_gap, "timeline gap between '" + labels[i - 1] + "' and '" + labels[i] +
                                                     "' (set gaps_allowed to permit)");
    }
    if (cadence == Cadence::monthly) return;
    for (const auto& l : labels) parse_day(l);
}

/// Month of every layer of the stack.
inline std::vector<Month> stack_months(const RasterStack& stack) {
    std::vector<Month> out;
    out.reserve(stack.timeline.size());
    for (const auto& l : stack.timeline) out.push_back(period_month(l, stack.cadence));
    return out;
}

inline void validate_stack(const RasterStack& stack) {
    stack.spec.validate();
    validate_timeline(stack.timeline, stack.cadence, stack.gaps_allowed);
    if (stack.layers.size() != stack.timeline.size())
        throw Error(ErrorCode::validation, "stack has " + std::to_string(stack.layers.size()) + " layers for " +
                                               std::to_string(stack.timeline.size()) + " timeline periods");
    for (std::size_t t = 0; t < stack.layers.size(); ++t)
        if (stack.layers[t].size() != stack.spec.cell_count())
            throw Error(ErrorCode::spec_mismatch, "layer '" + stack.timeline[t] + "' has the wrong cell count");
}

namespace detail {

template <typename T>
T manifest_field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key))
        throw Error(ErrorCode::validation, "manifest field '" + path + "' is missing");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::validation, "manifest field '" + path + "' has the wrong type");
    }
}

} // namespace detail

// Manifest layout (paths relative to the manifest's directory):
// {
//   "variable": "LST", "units": "degC", "cadence": "monthly", "gaps_allowed": false,
//   "grid": {"ncols": 200, "nrows": 200, "xllcorner": 0.0, "yllcorner": 0.0,
//            "cellsize": 0.005, "nodata": -9999},
//   "periods": [{"label": "2010-01", "file": "grids/2010-01.asc"}, ...]
// }
struct StackManifest {
    std::string variable = "LST";
    std::string units = "degC";
    Cadence cadence = Cadence::monthly;
    bool gaps_allowed = false;
    GridSpec spec;
    std::vector<std::string> timeline;
    std::vector<std::string> files;
};

inline StackManifest parse_manifest(const std::string& text, const std::string& source = "<manifest>") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::validation,
                    source + ": manifest is not valid JSON (byte " + std::to_string(e.byte) + ")");
    }
    if (!j.is_object()) throw Error(ErrorCode::validation, source + ": manifest must be a JSON object");
    StackManifest m;
    try {
        m.variable = detail::manifest_field<std::string>(j, "variable", "variable");
        m.units = detail::manifest_field<std::string>(j, "units", "units");
        m.cadence = parse_cadence(detail::manifest_field<std::string>(j, "cadence", "cadence"));
        if (j.contains("gaps_allowed")) m.gaps_allowed = detail::manifest_field<bool>(j, "gaps_allowed", "gaps_allowed");
        const auto& g = j.contains("grid") ? j.at("grid") : nlohmann::json();
        if (!g.is_object()) throw Error(ErrorCode::validation, "manifest field 'grid' is missing");
        const auto ncols = detail::manifest_field<long long>(g, "ncols", "grid.ncols");
        const auto nrows = detail::manifest_field<long long>(g, "nrows", "grid.nrows");
        if (ncols <= 0) throw Error(ErrorCode::validation, "manifest field 'grid.ncols' must be positive");
        if (nrows <= 0) throw Error(ErrorCode::validation, "manifest field 'grid.nrows' must be positive");
        m.spec.ncols = static_cast<std::size_t>(ncols);
        m.spec.nrows = static_cast<std::size_t>(nrows);
        m.spec.xll_deg = detail::manifest_field<double>(g, "xllcorner", "grid.xllcorner");
        m.spec.yll_deg = detail::manifest_field<double>(g, "yllcorner", "grid.yllcorner");
        m.spec.cellsize_deg = detail::manifest_field<double>(g, "cellsize", "grid.cellsize");
        m.spec.nodata = detail::manifest_field<double>(g, "nodata", "grid.nodata");
        m.spec.validate();
        if (!j.contains("periods") || !j.at("periods").is_array())
            throw Error(ErrorCode::validation, "manifest field 'periods' is missing");
        const auto& periods = j.at("periods");
        for (std::size_t i = 0; i < periods.size(); ++i) {
            const std::string p = "periods[" + std::to_string(i) + "]";
            m.timeline.push_back(detail::manifest_field<std::string>(periods[i], "label", p + ".label"));
            m.files.push_back(detail::manifest_field<std::string>(periods[i], "file", p + ".file"));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::validation) throw;
        throw Error(ErrorCode::validation, source + ": " + e.what());
    }
    validate_timeline(m.timeline, m.cadence, m.gaps_allowed);
    return m;
}

inline RasterStack load_stack(const std::filesystem::path& manifest_path, unsigned workers = 1) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open stack manifest " + manifest_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto m = parse_manifest(ss.str(), manifest_path.string());

    const auto base = manifest_path.parent_path();
    for (const auto& f : m.files)
        if (!std::filesystem::exists(base / f))
            throw Error(ErrorCode::missing_file, "period file " + (base / f).string() + " does not exist");

    RasterStack stack;
    stack.variable = m.variable;
    stack.units = m.units;
    stack.cadence = m.cadence;
    stack.gaps_allowed = m.gaps_allowed;
    stack.spec = m.spec;
    stack.timeline = m.timeline;
    stack.layers.resize(m.files.size());
    parallel_for(m.files.size(), workers, [&](std::size_t i) {
        const auto path = base / m.files[i];
        auto grid = load_grid(path);
        if (!same_geometry(grid.spec, m.spec))
            throw Error(ErrorCode::spec_mismatch, "grid geometry of " + path.string() + " (" +
                                                      std::to_string(grid.spec.ncols) + "x" +
                                                      std::to_string(grid.spec.nrows) +
                                                      ") does not match the manifest");
        stack.layers[i] = std::move(grid.values);
    });
    return stack;
}

/// Writes the stack as one ASCII grid per period under `<dir>/<grid_dir>/`
/// plus the manifest at `manifest_path`.
inline void write_stack(const std::filesystem::path& manifest_path, const RasterStack& stack,
                        const std::string& grid_dir = "grids", unsigned workers = 1) {
    validate_stack(stack);
    const auto base = manifest_path.parent_path();
    std::filesystem::create_directories(base / grid_dir);
    std::vector<std::string> files(stack.size());
    parallel_for(stack.size(), workers, [&](std::size_t t) {
        files[t] = grid_dir + "/" + stack.timeline[t] + ".asc";
        Grid g;
        g.spec = stack.spec;
        g.values = stack.layers[t];
        write_grid(base / files[t], g);
    });
    nlohmann::json j;
    j["variable"] = stack.variable;
    j["units"] = stack.units;
    j["cadence"] = std::string(to_string(stack.cadence));
    j["gaps_allowed"] = stack.gaps_allowed;
    j["grid"] = {{"ncols", stack.spec.ncols},       {"nrows", stack.spec.nrows},
                 {"xllcorner", stack.spec.xll_deg}, {"yllcorner", stack.spec.yll_deg},
                 {"cellsize", stack.spec.cellsize_deg}, {"nodata", stack.spec.nodata}};
    j["periods"] = nlohmann::json::array();
    for (std::size_t t = 0; t < stack.size(); ++t)
        j["periods"].push_back({{"label", stack.timeline[t]}, {"file", files[t]}});
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write manifest " + manifest_path.string());
    out << j.dump(2) << '\n';
}

} // namespace heatring
