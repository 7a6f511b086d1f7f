#pragma once

// End-to-end drivers behind the command-line tool: synthetic data
// generation, inversion, the radar-trace experiment path, and output files.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "carleman/carleman.hpp"
#include "carleman/config.hpp"
#include "carleman/forward.hpp"
#include "carleman/io.hpp"
#include "carleman/model.hpp"
#include "carleman/preprocess.hpp"

namespace carleman {

inline constexpr const char* kOutputDirEnv = "CARLEMAN_OUTPUT_DIR";

/// Output directory: the environment variable wins over the configured one.
inline std::filesystem::path output_directory(const RunConfig& cfg) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return cfg.output_dir;
}

/// Forward grid with whole time steps appended so data reach inv_T + eps.
inline ForwardGrid extended_forward_grid(const RunConfig& cfg) {
    ForwardGrid g = cfg.forward;
    g.validate();
    const double need = cfg.inv_T + g.space().node(g.space().nearest(cfg.eps));
    if (need > g.T) {
        const double dt = g.dt();
        const auto extra = static_cast<std::size_t>(std::ceil((need - g.T) / dt - 1e-9));
        g.T += static_cast<double>(extra) * dt;
        g.Nt += extra;
    }
    return g;
}

/// True (or user-supplied) coefficient on the forward axis.
inline CoefficientProfile true_profile(const RunConfig& cfg, const UniformAxis& axis) {
    if (!cfg.profile_file.empty()) {
        const CoefficientProfile file = io::read_profile(cfg.profile_file, cfg.cmax);
        CoefficientProfile c{axis, std::vector<double>(axis.size), cfg.cmax};
        for (std::size_t k = 0; k < axis.size; ++k) c.values[k] = file.at(axis.node(k));
        return c;
    }
    if (cfg.test == 0) return constant_profile(1.0, axis, cfg.cmax);
    return make_true_profile(cfg.test, axis, cfg.cmax);
}

struct Simulation {
    CoefficientProfile c_true;
    BoundaryData data;  // corrected, noisy g0 and its regularized derivative g1
    std::optional<WaveField> field;
    std::vector<std::string> warnings;
};

/// Forward solve, extraction at eps, near-origin correction, noise,
/// re-correction and regularized differentiation.
inline Simulation simulate(const RunConfig& cfg, bool keep_field = false) {
    cfg.validate();
    const ForwardGrid grid = extended_forward_grid(cfg);
    Simulation sim;
    sim.c_true = true_profile(cfg, grid.space());
    WaveField u = solve_forward(sim.c_true, grid, &sim.warnings);
    BoundaryData d = extract_boundary_data(u, cfg.eps);
    d = correct_near_origin(d, cfg.x_window, cfg.t_window);
    d = add_noise(d, cfg.delta, cfg.seed);
    d = correct_near_origin(d, cfg.x_window, cfg.t_window);
    d.g1 = tikhonov_derivative({d.times, d.g0}, cfg.reg).values;
    sim.data = std::move(d);
    if (keep_field) sim.field = std::move(u);
    return sim;
}

/// Writes g0.csv, g1.csv and c_true.csv (restricted to [0, xmax]).
inline void write_simulation(const std::filesystem::path& dir, const Simulation& sim, const RunConfig& cfg) {
    io::write_csv(dir / "g0.csv", io::g0_table(sim.data));
    io::write_csv(dir / "g1.csv", io::g1_table(sim.data));
    const UniformAxis& ax = sim.c_true.axis;
    io::CsvTable c{{"x", "c_true"}, std::vector<std::vector<double>>(2)};
    for (std::size_t k = 0; k < ax.size; ++k) {
        const double x = ax.node(k);
        if (x < -1e-12 || x > cfg.xmax + 1e-12) continue;
        c.columns[0].push_back(x);
        c.columns[1].push_back(sim.c_true.values[k]);
    }
    io::write_csv(dir / "c_true.csv", c);
    if (sim.field) io::write_field(dir / "field.csv", *sim.field);
}

inline InversionGrid inversion_grid(const RunConfig& cfg, double eps) {
    return InversionGrid::with_spacing(eps, cfg.xmax, cfg.inv_T, cfg.inv_dx, cfg.inv_dt);
}

inline AlgorithmOptions algorithm_options(const RunConfig& cfg) {
    AlgorithmOptions opt;
    opt.solver = cfg.solver;
    opt.tol = cfg.tol;
    opt.clamp = cfg.clamp;
    opt.cmax = cfg.cmax;
    opt.eta = cfg.eta;
    opt.k_max = cfg.k_max;
    opt.radius_factor = cfg.radius_factor;
    return opt;
}

inline IterationTrace invert(const RunConfig& cfg, const BoundaryData& data,
                             std::function<void(const IterationRecord&)> observer = {}) {
    cfg.validate();
    AlgorithmOptions opt = algorithm_options(cfg);
    opt.observer = std::move(observer);
    return run_algorithm(data, cfg.params, inversion_grid(cfg, data.eps), opt);
}

/// Writes c_comp.csv, trace.csv and profiles/c_NNN.csv for every iteration.
/// Wall times go to timing.txt so the CSVs stay byte-reproducible.
inline void write_inversion(const std::filesystem::path& dir, const IterationTrace& trace) {
    io::write_csv(dir / "c_comp.csv", io::profile_table(trace.c_comp, "c_comp"));
    io::write_csv(dir / "trace.csv", io::trace_table(trace));
    {
        std::ofstream timing(dir / "timing.txt");
        timing << "iter seconds\n";
        for (const auto& r : trace.records) timing << r.iter << ' ' << r.seconds << '\n';
    }
    for (const auto& r : trace.records) {
        char name[32];
        std::snprintf(name, sizeof name, "c_%03d.csv", r.iter);
        io::write_csv(dir / "profiles" / name, io::profile_table(r.c, "c_n"));
    }
}

struct Experiment {
    EnvelopeSide side = EnvelopeSide::Upper;
    TimeSeries scaled;     // f_raw / mu
    TimeSeries processed;  // truncated envelope
    BoundaryData data;     // g0 = 1/2 + processed, extended with 1/2 to T + eps
    IterationTrace trace;
    RelativeDielectric report;
};

/// Turns a calibrated, truncated trace into boundary data at eps. The
/// processed signal rides on the plateau value 1/2 of the incident wave.
inline BoundaryData experiment_data(const TimeSeries& processed, const RunConfig& cfg, double eps) {
    processed.validate();
    BoundaryData d;
    d.eps = eps;
    d.times = processed.times;
    d.g0.resize(processed.size());
    for (std::size_t k = 0; k < processed.size(); ++k) d.g0[k] = 0.5 + processed.values[k];
    const double step = processed.dt();
    while (d.times.back() < cfg.inv_T + eps - 1e-9) {
        d.times.push_back(d.times.back() + step);
        d.g0.push_back(0.5);
    }
    d.g1 = tikhonov_derivative({d.times, d.g0}, cfg.reg).values;
    return d;
}

/// Calibration, envelope selection and truncation, inversion, and the
/// relative dielectric report. c_target is the inverted profile scaled to
/// the background's midpoint.
inline Experiment experiment(const RunConfig& cfg, const TimeSeries& raw,
                             std::function<void(const IterationRecord&)> observer = {}) {
    cfg.validate();
    Experiment ex;
    ex.scaled = scale_calibration(raw, cfg.medium);
    ex.side = select_envelope(ex.scaled);
    ex.processed = envelope_truncate(ex.scaled, ex.side, cfg.window);
    const ForwardGrid fg = cfg.forward;
    const double eps = fg.space().node(fg.space().nearest(cfg.eps));
    ex.data = experiment_data(ex.processed, cfg, eps);
    ex.trace = invert(cfg, ex.data, std::move(observer));
    CoefficientProfile c_target = ex.trace.c_comp;
    for (double& v : c_target.values) v *= cfg.background.mid();
    const Interval region{std::max(cfg.region.lo, eps), std::min(cfg.region.hi, cfg.xmax)};
    ex.report = relative_dielectric(c_target, {cfg.background, region, cfg.medium});
    return ex;
}

inline std::string interval_report(const Interval& i) {
    char buf[96];
    if (i.is_point())
        std::snprintf(buf, sizeof buf, "%.2f", i.lo);
    else
        std::snprintf(buf, sizeof buf, "[%.2f, %.2f]", i.lo, i.hi);
    return buf;
}

/// processed.csv, c_rel.csv, c_comp.csv, trace.csv, profiles/, report.txt
inline void write_experiment(const std::filesystem::path& dir, const Experiment& ex) {
    io::write_csv(dir / "processed.csv", {{"t", "value"}, {ex.processed.times, ex.processed.values}});
    io::write_csv(dir / "g0.csv", io::g0_table(ex.data));
    io::write_csv(dir / "g1.csv", io::g1_table(ex.data));
    io::write_csv(dir / "c_rel.csv", io::profile_table(ex.report.c_rel, "c_rel"));
    write_inversion(dir, ex.trace);
    std::ofstream out(dir / "report.txt");
    out << "envelope = " << to_string(ex.side) << "\n"
        << "branch = " << (ex.report.raised ? "max" : "min") << "\n"
        << "c_comp = " << interval_report(ex.report.c_comp) << "\n";
}

}  // namespace carleman
