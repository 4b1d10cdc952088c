#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/format.hpp"
#include "heatring/grid.hpp"
#include "heatring/time.hpp"

namespace heatring {

struct SiteRecord {
    std::string site_id;
    GeoPoint point;
    Month start_of_operations;
    std::string provider;
};

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

/// Site registry CSV: header `site_id,lat_deg,lon_deg,start_of_operations[,provider]`
/// (columns located by name).
inline std::vector<SiteRecord> parse_sites(const std::string& text, const std::string& source = "<sites>") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };

    std::map<std::string, std::size_t> col;
    while (std::getline(in, line)) {
        ++lineno;
        if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw Error(ErrorCode::parse, source + ": empty site registry (no header row)");
    const auto header = detail::split_csv(line);
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"site_id", "lat_deg", "lon_deg", "start_of_operations"})
        if (!col.count(name)) throw Error(ErrorCode::parse, where() + "header lacks column '" + name + "'");
    const bool has_provider = col.count("provider") > 0;
    const std::size_t required_last =
        std::max({col["site_id"], col["lat_deg"], col["lon_deg"], col["start_of_operations"]});

    auto number = [&](const std::string& s, const char* field) {
        double v = 0.0;
        const char* first = s.data();
        if (!s.empty() && s.front() == '+') ++first;
        auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
            throw Error(ErrorCode::parse, where() + field + " '" + s + "' is not a number");
        return v;
    };

    std::vector<SiteRecord> sites;
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() <= required_last)
            throw Error(ErrorCode::parse, where() + "expected " + std::to_string(header.size()) + " fields, found " +
                                              std::to_string(f.size()));
        SiteRecord s;
        s.site_id = f[col["site_id"]];
        if (s.site_id.empty()) throw Error(ErrorCode::parse, where() + "empty site_id");
        s.point.lat_deg = number(f[col["lat_deg"]], "lat_deg");
        s.point.lon_deg = number(f[col["lon_deg"]], "lon_deg");
        if (s.point.lat_deg < -90.0 || s.point.lat_deg > 90.0)
            throw Error(ErrorCode::out_of_range, where() + "lat_deg " + f[col["lat_deg"]] + " outside [-90, 90]");
        if (s.point.lon_deg < -180.0 || s.point.lon_deg >= 180.0)
            throw Error(ErrorCode::out_of_range, where() + "lon_deg " + f[col["lon_deg"]] + " outside [-180, 180)");
        try {
            s.start_of_operations = parse_month(f[col["start_of_operations"]]);
        } catch (const Error& e) {
            throw Error(ErrorCode::bad_date, where() + e.what());
        }
        if (has_provider && col["provider"] < f.size()) s.provider = f[col["provider"]];
        ++seen[s.site_id];
        sites.push_back(std::move(s));
    }
    std::string dups;
    for (const auto& [id, n] : seen)
        if (n > 1) dups += (dups.empty() ? "" : ", ") + id;
    if (!dups.empty()) throw Error(ErrorCode::duplicate_site, source + ": duplicate site_id: " + dups);
    return sites;
}

inline std::vector<SiteRecord> load_sites(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open site registry " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_sites(ss.str(), path.string());
}

inline std::string format_sites(const std::vector<SiteRecord>& sites) {
    std::string out = "site_id,lat_deg,lon_deg,start_of_operations,provider\n";
    for (const auto& s : sites)
        out += detail::csv_escape(s.site_id) + "," + format_exact(s.point.lat_deg) + "," +
               format_exact(s.point.lon_deg) + "," + s.start_of_operations.label() + "," +
               detail::csv_escape(s.provider) + "\n";
    return out;
}

inline void write_sites(const std::filesystem::path& path, const std::vector<SiteRecord>& sites) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write site registry " + path.string());
    out << format_sites(sites);
}

} // namespace heatring
