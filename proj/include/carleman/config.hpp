#pragma once

// Run configuration: every experiment parameter, loadable from an INI-style
// file with [sections] and overridable key by key ("section.key").

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carleman/carleman.hpp"
#include "carleman/error.hpp"
#include "carleman/io.hpp"
#include "carleman/model.hpp"
#include "carleman/preprocess.hpp"

namespace carleman {

struct RunConfig {
    // data
    int test = 1;              // 1..4, or 0 for the homogeneous medium c = 1
    std::string profile_file;  // x,c profile used instead of `test` when set
    double delta = 0.05;
    std::uint64_t seed = 7;
    double reg = 1e-4;  // Tikhonov weight for g0'
    double x_window = 0.0067;
    double t_window = 0.26;

    ForwardGrid forward;

    // inversion grid; eps is snapped to the nearest forward node
    double eps = 0.0067;
    double xmax = 3.0;
    double inv_dx = 0.0033;
    double inv_dt = 0.02;
    double inv_T = 6.0;

    CarlemanParams params;
    double tol = 1e-3;
    bool clamp = true;
    double cmax = 16.0;

    SolverKind solver = SolverKind::Direct;
    double eta = 0.1;
    int k_max = 2000;
    double radius_factor = 10.0;

    // experiment
    Medium medium = Medium::Air;
    Interval background = Interval::point(1.0);
    Interval region{0.0, 1e300};
    double window = 0.5;

    std::string output_dir = "out";
    bool write_field = false;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    /// Applies every key of an INI file; unknown keys are errors.
    void load(const std::filesystem::path& path);
    void validate() const;
    /// All keys in loadable INI form.
    std::string dump() const;

    static std::vector<std::string> keys();
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw InputError("config " + key + ": '" + v + "' is not a number");
    return out;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw InputError("config " + key + ": '" + v + "' is not an integer");
    return out;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    const long long n = parse_integer(key, v);
    if (n < 0) throw InputError("config " + key + ": must be nonnegative");
    return static_cast<std::size_t>(n);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw InputError("config " + key + ": '" + v + "' is not a boolean");
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\"'");
    const auto e = s.find_last_not_of(" \t\"'");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

// "3", "3,5" or "[3,5]"
inline Interval parse_interval(const std::string& key, std::string v) {
    v = trim(v);
    if (!v.empty() && v.front() == '[') v.erase(0, 1);
    if (!v.empty() && v.back() == ']') v.pop_back();
    const auto comma = v.find(',');
    if (comma == std::string::npos) return Interval::point(parse_double(key, trim(v)));
    const Interval out{parse_double(key, trim(v.substr(0, comma))), parse_double(key, trim(v.substr(comma + 1)))};
    if (out.lo > out.hi) throw InputError("config " + key + ": interval lower end exceeds upper end");
    return out;
}

inline std::string interval_text(const Interval& i) {
    if (i.is_point()) return io::format_number(i.lo);
    return "[" + io::format_number(i.lo) + "," + io::format_number(i.hi) + "]";
}

struct ConfigKey {
    const char* name;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CARLEMAN_DOUBLE_KEY(key, member)                                                                   \
    ConfigKey {                                                                                          \
        key, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
            [](const RunConfig& c) { return io::format_number(c.member); }                                 \
    }
#define CARLEMAN_COUNT_KEY(key, member)                                                                    \
    ConfigKey {                                                                                          \
        key, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_count(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                    \
    }

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> table = {
        {"data.test", [](RunConfig& c, const std::string& k, const std::string& v) { c.test = static_cast<int>(parse_integer(k, v)); },
         [](const RunConfig& c) { return std::to_string(c.test); }},
        {"data.profile", [](RunConfig& c, const std::string&, const std::string& v) { c.profile_file = v; },
         [](const RunConfig& c) { return c.profile_file; }},
        CARLEMAN_DOUBLE_KEY("data.delta", delta),
        {"data.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_count(k, v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        CARLEMAN_DOUBLE_KEY("data.reg", reg),
        CARLEMAN_DOUBLE_KEY("data.x_window", x_window),
        CARLEMAN_DOUBLE_KEY("data.t_window", t_window),
        CARLEMAN_DOUBLE_KEY("forward.a", forward.a),
        CARLEMAN_DOUBLE_KEY("forward.T", forward.T),
        CARLEMAN_COUNT_KEY("forward.Nx", forward.Nx),
        CARLEMAN_COUNT_KEY("forward.Nt", forward.Nt),
        CARLEMAN_DOUBLE_KEY("inversion.eps", eps),
        CARLEMAN_DOUBLE_KEY("inversion.xmax", xmax),
        CARLEMAN_DOUBLE_KEY("inversion.dx", inv_dx),
        CARLEMAN_DOUBLE_KEY("inversion.dt", inv_dt),
        CARLEMAN_DOUBLE_KEY("inversion.T", inv_T),
        CARLEMAN_DOUBLE_KEY("carleman.lambda", params.lambda),
        CARLEMAN_DOUBLE_KEY("carleman.alpha", params.alpha),
        CARLEMAN_DOUBLE_KEY("carleman.beta", params.beta),
        {"carleman.n_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.params.n_iters = static_cast<int>(parse_integer(k, v)); },
         [](const RunConfig& c) { return std::to_string(c.params.n_iters); }},
        CARLEMAN_DOUBLE_KEY("carleman.tol", tol),
        {"carleman.clamp", [](RunConfig& c, const std::string& k, const std::string& v) { c.clamp = parse_bool(k, v); },
         [](const RunConfig& c) { return std::string(c.clamp ? "true" : "false"); }},
        CARLEMAN_DOUBLE_KEY("carleman.cmax", cmax),
        {"solver.kind", [](RunConfig& c, const std::string&, const std::string& v) { c.solver = parse_solver(v); },
         [](const RunConfig& c) { return std::string(to_string(c.solver)); }},
        CARLEMAN_DOUBLE_KEY("solver.eta", eta),
        {"solver.k_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.k_max = static_cast<int>(parse_integer(k, v)); },
         [](const RunConfig& c) { return std::to_string(c.k_max); }},
        CARLEMAN_DOUBLE_KEY("solver.radius_factor", radius_factor),
        {"experiment.medium",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "air") c.medium = Medium::Air;
             else if (v == "ground") c.medium = Medium::Ground;
             else throw InputError("config " + k + ": expected air or ground, got '" + v + "'");
         },
         [](const RunConfig& c) { return std::string(c.medium == Medium::Air ? "air" : "ground"); }},
        {"experiment.background", [](RunConfig& c, const std::string& k, const std::string& v) { c.background = parse_interval(k, v); },
         [](const RunConfig& c) { return interval_text(c.background); }},
        {"experiment.region", [](RunConfig& c, const std::string& k, const std::string& v) { c.region = parse_interval(k, v); },
         [](const RunConfig& c) { return interval_text(c.region); }},
        CARLEMAN_DOUBLE_KEY("experiment.window", window),
        {"output.dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
         [](const RunConfig& c) { return c.output_dir; }},
        {"output.field", [](RunConfig& c, const std::string& k, const std::string& v) { c.write_field = parse_bool(k, v); },
         [](const RunConfig& c) { return std::string(c.write_field ? "true" : "false"); }},
    };
    return table;
}

#undef CARLEMAN_DOUBLE_KEY
#undef CARLEMAN_COUNT_KEY

inline const ConfigKey& find_key(const std::string& key) {
    for (const auto& k : config_keys())
        if (key == k.name) return k;
    throw InputError("config: unknown key '" + key + "'");
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    detail::find_key(key).set(*this, key, detail::trim(value));
}

inline std::string RunConfig::get(const std::string& key) const { return detail::find_key(key).get(*this); }

inline std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& k : detail::config_keys()) out.emplace_back(k.name);
    return out;
}

inline void RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path.string() + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw InputError("config '" + path.string() + "': " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        std::string value;
        for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
        try {
            set(item.fullname(), value);
        } catch (const InputError& e) {
            throw InputError("config '" + path.string() + "': " + e.what());
        }
    }
}

inline void RunConfig::validate() const {
    const auto field = [](const std::string& key, bool ok, const std::string& what) {
        if (!ok) throw InputError("config " + key + ": " + what);
    };
    field("data.test", profile_file.empty() ? (test >= 0 && test <= 4) : true, "must be 0 (homogeneous) or 1..4");
    field("data.delta", delta >= 0.0, "must be nonnegative");
    field("data.reg", reg > 0.0, "must be positive");
    field("data.t_window", t_window >= 0.0, "must be nonnegative");
    forward.validate();
    field("inversion.eps", eps > 0.0 && eps < xmax, "must lie in (0, xmax)");
    field("inversion.dx", inv_dx > 0.0 && inv_dx < xmax - eps, "must be positive and below xmax - eps");
    field("inversion.dt", inv_dt > 0.0 && inv_dt < inv_T, "must be positive and below T");
    field("inversion.T", inv_T > 0.0, "must be positive");
    params.validate();
    field("carleman.tol", tol > 0.0, "must be positive");
    field("carleman.cmax", cmax > 1.0, "must exceed 1");
    field("solver.eta", eta > 0.0 && eta < 1.0, "must lie in (0, 1)");
    field("solver.k_max", k_max >= 0, "must be nonnegative");
    field("solver.radius_factor", radius_factor > 0.0, "must be positive");
    field("experiment.background", background.lo > 0.0, "must be positive");
    field("experiment.window", window > 0.0, "must be positive");
    field("output.dir", !output_dir.empty(), "must not be empty");
}

inline std::string RunConfig::dump() const {
    std::string out;
    std::string section;
    for (const auto& k : detail::config_keys()) {
        const std::string name = k.name;
        const auto dot = name.find('.');
        if (name.substr(0, dot) != section) {
            section = name.substr(0, dot);
            out += (out.empty() ? "" : "\n") + std::string("[") + section + "]\n";
        }
        out += name.substr(dot + 1) + " = " + k.get(*this) + "\n";
    }
    return out;
}

}  // namespace carleman
