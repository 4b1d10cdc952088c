#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "heatring/error.hpp"
#include "heatring/format.hpp"
#include "heatring/grid.hpp"

// ESRI ASCII Grid reader/writer.
//
//   NCOLS        <int>
//   NROWS        <int>
//   XLLCORNER    <deg>
//   YLLCORNER    <deg>
//   CELLSIZE     <deg>
//   NODATA_VALUE <number>
//   <nrows lines of ncols numbers, first line = northernmost row>
//
// Keys are case-insensitive and may appear in any order within the first six
// lines. Cells equal to NODATA_VALUE are loaded as kNoData.

namespace heatring {

namespace detail {

struct GridTokenizer {
    std::string_view text;
    std::string source;
    std::size_t pos = 0;
    std::size_t line = 1;
    std::size_t line_start = 0;

    [[noreturn]] void fail(std::size_t at, const std::string& what) const {
        throw Error(ErrorCode::parse,
                    source + ":" + std::to_string(line) + ":" + std::to_string(at - line_start + 1) + ": " + what);
    }

    bool at_end() const { return pos >= text.size(); }

    void skip_blanks() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
    }

    bool at_eol() {
        skip_blanks();
        return pos >= text.size() || text[pos] == '\n';
    }

    void next_line() {
        skip_blanks();
        if (pos < text.size() && text[pos] == '\n') {
            ++pos;
            ++line;
            line_start = pos;
        }
    }

    // Returns the next token on the current line; empty at end of line.
    std::string_view token(std::size_t& start) {
        skip_blanks();
        start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    }

    double number(std::string_view tok, std::size_t start) const {
        double v = 0.0;
        const char* first = tok.data();
        if (!tok.empty() && tok.front() == '+') ++first;
        auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v))
            fail(start, "non-numeric token '" + std::string(tok) + "'");
        return v;
    }
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

} // namespace detail

inline Grid parse_grid(std::string_view text, const std::string& source = "<grid>") {
    detail::GridTokenizer tk{text, source};
    double header[6] = {};
    bool seen[6] = {};
    static constexpr std::string_view keys[6] = {"NCOLS", "NROWS", "XLLCORNER", "YLLCORNER", "CELLSIZE",
                                                 "NODATA_VALUE"};
    for (int h = 0; h < 6; ++h) {
        std::size_t start = 0;
        const auto key_tok = tk.token(start);
        if (key_tok.empty()) tk.fail(start, "malformed header: expected 6 header lines");
        const auto key = detail::upper(key_tok);
        const auto it = std::find(std::begin(keys), std::end(keys), key);
        if (it == std::end(keys)) tk.fail(start, "malformed header: unknown key '" + std::string(key_tok) + "'");
        const auto k = static_cast<std::size_t>(it - std::begin(keys));
        if (seen[k]) tk.fail(start, "malformed header: duplicate key " + key);
        std::size_t vstart = 0;
        const auto val = tk.token(vstart);
        if (val.empty()) tk.fail(vstart, "malformed header: missing value for " + key);
        header[k] = tk.number(val, vstart);
        seen[k] = true;
        if (!tk.at_eol()) tk.fail(tk.pos, "malformed header: trailing text after " + key);
        tk.next_line();
    }
    for (int k = 0; k < 2; ++k)
        if (header[k] < 1 || header[k] != std::floor(header[k]) || header[k] > 1e8)
            throw Error(ErrorCode::parse, source + ": " + std::string(keys[k]) + " must be a positive integer");

    GridSpec spec;
    spec.ncols = static_cast<std::size_t>(header[0]);
    spec.nrows = static_cast<std::size_t>(header[1]);
    spec.xll_deg = header[2];
    spec.yll_deg = header[3];
    spec.cellsize_deg = header[4];
    spec.nodata = header[5];
    try {
        spec.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::parse, source + ": " + e.what());
    }

    Grid grid(spec, kNoData);
    for (std::size_t r = 0; r < spec.nrows; ++r) {
        // tolerate blank lines between rows
        while (!tk.at_end() && tk.at_eol()) tk.next_line();
        if (tk.at_end())
            throw Error(ErrorCode::parse, source + ":" + std::to_string(tk.line) + ": wrong cell count: expected " +
                                              std::to_string(spec.nrows) + " rows, found " + std::to_string(r));
        for (std::size_t c = 0; c < spec.ncols; ++c) {
            std::size_t start = 0;
            const auto tok = tk.token(start);
            if (tok.empty())
                tk.fail(start, "wrong cell count: expected " + std::to_string(spec.ncols) + " values, found " +
                                   std::to_string(c));
            const double v = tk.number(tok, start);
            grid.at(r, c) = v == spec.nodata ? kNoData : v;
        }
        if (!tk.at_eol())
            tk.fail(tk.pos, "wrong cell count: more than " + std::to_string(spec.ncols) + " values in row");
        tk.next_line();
    }
    while (!tk.at_end()) {
        if (!tk.at_eol()) tk.fail(tk.pos, "wrong cell count: data after the last row");
        tk.next_line();
    }
    return grid;
}

inline Grid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open grid file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_grid(ss.str(), path.string());
}

inline std::string format_grid(const Grid& grid) {
    const auto& s = grid.spec;
    std::string out;
    out.reserve(s.cell_count() * 12 + 128);
    out += "NCOLS " + std::to_string(s.ncols) + "\n";
    out += "NROWS " + std::to_string(s.nrows) + "\n";
    out += "XLLCORNER " + format_exact(s.xll_deg) + "\n";
    out += "YLLCORNER " + format_exact(s.yll_deg) + "\n";
    out += "CELLSIZE " + format_exact(s.cellsize_deg) + "\n";
    const std::string nodata = format_exact(s.nodata);
    out += "NODATA_VALUE " + nodata + "\n";
    for (std::size_t r = 0; r < s.nrows; ++r) {
        for (std::size_t c = 0; c < s.ncols; ++c) {
            const double v = grid.at(r, c);
            if (c) out += ' ';
            if (!is_valid(v)) {
                out += nodata;
            } else {
                if (v == s.nodata || !std::isfinite(v))
                    throw Error(ErrorCode::validation, "cell (" + std::to_string(r) + ", " + std::to_string(c) +
                                                           ") value collides with the NODATA sentinel");
                out += format_exact(v);
            }
        }
        out += '\n';
    }
    return out;
}

inline void write_grid(const std::filesystem::path& path, const Grid& grid) {
    const auto text = format_grid(grid);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write grid file " + path.string());
    out << text;
}

} // namespace heatring
