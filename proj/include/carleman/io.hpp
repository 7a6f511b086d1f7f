#pragma once

// CSV reading and writing for boundary data, profiles, traces and raw
// series. Numbers are written with 9 significant digits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "carleman/carleman.hpp"
#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/model.hpp"
#include "carleman/preprocess.hpp"

namespace carleman::io {

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Header plus numeric columns.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    /// Column by header name; throws InputError naming `source` if absent.
    const std::vector<double>& column(const std::string& name, const std::string& source = "csv") const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return columns[k];
        throw InputError(source + ": missing column '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "csv") {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        const auto fields = detail::split_fields(line);
        if (t.header.empty()) {
            t.header = fields;
            t.columns.assign(fields.size(), {});
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        for (std::size_t k = 0; k < fields.size(); ++k) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(fields[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != fields[k].size())
                throw InputError(source + ":" + std::to_string(lineno) + ": field " + std::to_string(k + 1) +
                                 " ('" + fields[k] + "') is not a number");
            t.columns[k].push_back(v);
        }
    }
    if (t.header.empty()) throw InputError(source + ": empty file");
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
    return parse_csv(in, path.string());
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    for (std::size_t k = 0; k < t.header.size(); ++k) out << (k ? "," : "") << t.header[k];
    out << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << format_number(t.columns[k][r]);
        out << '\n';
    }
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_csv(out, t);
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

// Boundary data: t,g0 / t,g1 / t,g0,g1.

inline CsvTable g0_table(const BoundaryData& d) { return {{"t", "g0"}, {d.times, d.g0}}; }
inline CsvTable g1_table(const BoundaryData& d) { return {{"t", "g1"}, {d.times, d.g1}}; }

/// Boundary data from a g0 file (t,g0 or t,g0,g1) and an optional separate
/// g1 file on the same time axis.
inline BoundaryData read_boundary_data(const std::filesystem::path& g0_path, const std::filesystem::path& g1_path,
                                       double eps) {
    const CsvTable a = read_csv(g0_path);
    BoundaryData d;
    d.eps = eps;
    d.times = a.column("t", g0_path.string());
    d.g0 = a.column("g0", g0_path.string());
    if (a.has("g1")) d.g1 = a.column("g1");
    if (!g1_path.empty()) {
        const CsvTable b = read_csv(g1_path);
        const auto& t1 = b.column("t", g1_path.string());
        if (t1.size() != d.times.size())
            throw InputError(g1_path.string() + ": time axis differs in length from " + g0_path.string());
        for (std::size_t k = 0; k < t1.size(); ++k)
            if (std::abs(t1[k] - d.times[k]) > 1e-9 * std::max(1.0, std::abs(t1[k])))
                throw InputError(g1_path.string() + ":" + std::to_string(k + 2) + ": time differs from " + g0_path.string());
        d.g1 = b.column("g1", g1_path.string());
    }
    TimeSeries{d.times, d.g0}.validate();
    return d;
}

inline CsvTable profile_table(const CoefficientProfile& c, const std::string& name) {
    return {{"x", name}, {c.axis.nodes(), c.values}};
}

/// x,c profile on a uniform axis.
inline CoefficientProfile read_profile(const std::filesystem::path& path, double cmax) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != 2) throw InputError(path.string() + ": expected two columns x,c");
    const auto& x = t.column("x", path.string());
    const auto& v = t.columns[1];
    TimeSeries{x, v}.validate();
    return {UniformAxis{x.front(), x[1] - x[0], x.size()}, v, cmax};
}

inline CsvTable trace_table(const IterationTrace& tr) {
    CsvTable t{{"iter", "consec_err", "objective", "grad_norm"}, std::vector<std::vector<double>>(4)};
    for (const auto& r : tr.records) {
        t.columns[0].push_back(r.iter);
        t.columns[1].push_back(r.consec_err);
        t.columns[2].push_back(r.objective);
        t.columns[3].push_back(r.grad_norm);
    }
    return t;
}

/// x,t,u triples of a wave field, every `stride`-th node in each direction.
inline void write_field(const std::filesystem::path& path, const WaveField& u, std::size_t stride = 1) {
    CsvTable t{{"x", "t", "u"}, std::vector<std::vector<double>>(3)};
    const UniformAxis xs = u.grid.space();
    const UniformAxis ts = u.grid.time();
    for (std::size_t j = 0; j < u.grid.Nt; j += stride)
        for (std::size_t i = 0; i < u.grid.Nx; i += stride) {
            t.columns[0].push_back(xs.node(i));
            t.columns[1].push_back(ts.node(j));
            t.columns[2].push_back(u.at(i, j));
        }
    write_csv(path, t);
}

/// Raw radar-style series with columns t,value.
inline TimeSeries read_time_series(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    TimeSeries s{t.column("t", path.string()), t.column("value", path.string())};
    s.validate();
    return s;
}

}  // namespace carleman::io
