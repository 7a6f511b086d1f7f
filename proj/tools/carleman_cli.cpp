// carleman: synthetic data, inversion and radar-trace processing for the 1D
// dielectric-constant inverse problem.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carleman/config.hpp"
#include "carleman/io.hpp"
#include "carleman/pipeline.hpp"

namespace fs = std::filesystem;
using namespace carleman;

namespace {

// Flags shared by every subcommand. They are applied on top of the config
// file, so flags win.
struct CommonFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::string> out;
    std::optional<double> delta, lambda, alpha, beta, dx, xmax, tol, eta, reg;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_iters, k_max;
    std::optional<std::string> solver;
    bool no_clamp = false;
    bool quiet = false;
    bool print_config = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "INI config file ([section] key = value)")->check(CLI::ExistingFile);
        app->add_option("-s,--set", sets, "override one key, e.g. --set carleman.beta=1e-11 (repeatable)");
        app->add_option("-o,--out", out, "output directory (env " + std::string(kOutputDirEnv) + " overrides the config)");
        app->add_option("--delta", delta, "noise level");
        app->add_option("--seed", seed, "noise seed");
        app->add_option("--reg", reg, "Tikhonov weight for g0'");
        app->add_option("--lambda", lambda, "Carleman weight exponent");
        app->add_option("--alpha", alpha, "Carleman weight time slope");
        app->add_option("--beta", beta, "regularization parameter");
        app->add_option("--dx", dx, "inversion grid spacing in x");
        app->add_option("--xmax", xmax, "right end of the inversion domain");
        app->add_option("--n-iters", n_iters, "outer iteration cap");
        app->add_option("--tol", tol, "stopping tolerance on the consecutive relative error");
        app->add_option("--solver", solver, "minimizer: direct, gd or gp");
        app->add_option("--eta", eta, "step fraction for gd/gp");
        app->add_option("--k-max", k_max, "step cap for gd/gp");
        app->add_flag("--no-clamp", no_clamp, "do not clamp q(x,0) into its admissible range");
        app->add_flag("-q,--quiet", quiet, "no per-iteration progress");
        app->add_flag("--print-config", print_config, "print the resolved configuration as INI and exit");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config.empty()) cfg.load(config);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
        if (out) cfg.output_dir = *out;
        if (delta) cfg.delta = *delta;
        if (seed) cfg.seed = *seed;
        if (reg) cfg.reg = *reg;
        if (lambda) cfg.params.lambda = *lambda;
        if (alpha) cfg.params.alpha = *alpha;
        if (beta) cfg.params.beta = *beta;
        if (dx) cfg.inv_dx = *dx;
        if (xmax) cfg.xmax = *xmax;
        if (n_iters) cfg.params.n_iters = *n_iters;
        if (tol) cfg.tol = *tol;
        if (solver) cfg.solver = parse_solver(*solver);
        if (eta) cfg.eta = *eta;
        if (k_max) cfg.k_max = *k_max;
        if (no_clamp) cfg.clamp = false;
        cfg.validate();
        return cfg;
    }
};

std::function<void(const IterationRecord&)> progress(bool quiet) {
    if (quiet) return {};
    return [](const IterationRecord& r) {
        std::fprintf(stderr, "iter %2d  consec_err %-12s max c %-10s objective %-12s %.2fs\n", r.iter,
                     io::format_number(r.consec_err).c_str(), io::format_number(r.c.max()).c_str(),
                     io::format_number(r.objective).c_str(), r.seconds);
    };
}

double snapped_eps(const RunConfig& cfg) {
    const UniformAxis ax = cfg.forward.space();
    return ax.node(ax.nearest(cfg.eps));
}

void report_inversion(const IterationTrace& tr, double seconds) {
    const auto& c = tr.c_comp;
    std::printf("max c_comp = %s at x = %s\n", io::format_number(c.max()).c_str(),
                io::format_number(c.axis.node(c.argmax())).c_str());
    std::printf("iterations = %d (%s)\n", tr.records.back().iter, tr.converged ? "converged" : "iteration cap reached");
    std::printf("wall time = %.2f s\n", seconds);
}

int print_config(const RunConfig& cfg) {
    std::fputs(cfg.dump().c_str(), stdout);
    return 0;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_simulate(const CommonFlags& flags, int test, const std::string& profile, bool field) {
    RunConfig cfg = flags.resolve();
    if (test >= 0) cfg.test = test;
    if (!profile.empty()) cfg.profile_file = profile;
    cfg.validate();
    if (flags.print_config) return print_config(cfg);
    const fs::path dir = cfg.output_dir;
    const Simulation sim = simulate(cfg, field || cfg.write_field);
    print_warnings(sim.warnings);
    write_simulation(dir, sim, cfg);
    std::printf("wrote %s, %s, %s\n", (dir / "g0.csv").c_str(), (dir / "g1.csv").c_str(), (dir / "c_true.csv").c_str());
    return 0;
}

int run_invert(const CommonFlags& flags, std::string g0, std::string g1) {
    const RunConfig cfg = flags.resolve();
    if (flags.print_config) return print_config(cfg);
    const fs::path dir = cfg.output_dir;
    if (g0.empty()) g0 = (dir / "g0.csv").string();
    if (g1.empty() && fs::exists(dir / "g1.csv")) g1 = (dir / "g1.csv").string();
    BoundaryData data = io::read_boundary_data(g0, g1, snapped_eps(cfg));
    if (data.g1.empty()) data.g1 = tikhonov_derivative({data.times, data.g0}, cfg.reg).values;
    const auto start = std::chrono::steady_clock::now();
    const IterationTrace tr = invert(cfg, data, progress(flags.quiet));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_inversion(dir, tr);
    report_inversion(tr, seconds);
    return 0;
}

int run_experiment(const CommonFlags& flags, const std::string& raw, const std::optional<std::string>& medium,
                   const std::optional<std::string>& background, const std::optional<std::string>& region,
                   const std::optional<double>& window) {
    RunConfig cfg = flags.resolve();
    if (medium) cfg.set("experiment.medium", *medium);
    if (background) cfg.set("experiment.background", *background);
    if (region) cfg.set("experiment.region", *region);
    if (window) cfg.window = *window;
    cfg.validate();
    if (flags.print_config) return print_config(cfg);
    const TimeSeries series = io::read_time_series(raw);
    const Experiment ex = experiment(cfg, series, progress(flags.quiet));
    write_experiment(cfg.output_dir, ex);
    std::printf("%s envelope\n", to_string(ex.side));
    std::printf("c_comp = %s\n", interval_report(ex.report.c_comp).c_str());
    return 0;
}

int run_reproduce(const CommonFlags& flags, int test) {
    RunConfig cfg = flags.resolve();
    cfg.test = test;
    cfg.validate();
    if (flags.print_config) return print_config(cfg);
    const fs::path dir = cfg.output_dir;
    const auto start = std::chrono::steady_clock::now();
    const Simulation sim = simulate(cfg);
    print_warnings(sim.warnings);
    write_simulation(dir, sim, cfg);
    // invert what was written, so reproduce matches simulate followed by invert
    const BoundaryData data = io::read_boundary_data(dir / "g0.csv", dir / "g1.csv", sim.data.eps);
    const IterationTrace tr = invert(cfg, data, progress(flags.quiet));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_inversion(dir, tr);
    std::printf("test %d\n", test);
    report_inversion(tr, seconds);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Carleman contraction inversion for the 1D dielectric-constant inverse problem"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    CommonFlags sim_flags, inv_flags, exp_flags, rep_flags;
    int sim_test = -1;
    std::string sim_profile;
    bool sim_field = false;
    auto* sim = app.add_subcommand("simulate", "forward-solve a profile and write noisy boundary data g0.csv, g1.csv, c_true.csv");
    sim_flags.attach(sim);
    sim->add_option("-t,--test", sim_test, "benchmark profile 1..4, or 0 for c = 1")->check(CLI::Range(0, 4));
    sim->add_option("--profile", sim_profile, "x,c CSV profile instead of a benchmark")->check(CLI::ExistingFile);
    sim->add_flag("--field", sim_field, "also write the full wave field as field.csv (large)");

    std::string inv_g0, inv_g1;
    auto* inv = app.add_subcommand("invert", "reconstruct c(x) from boundary data; writes c_comp.csv, trace.csv, profiles/");
    inv_flags.attach(inv);
    inv->add_option("--g0", inv_g0, "t,g0 CSV (default <out>/g0.csv)")->check(CLI::ExistingFile);
    inv->add_option("--g1", inv_g1, "t,g1 CSV (default <out>/g1.csv if present, else computed)")->check(CLI::ExistingFile);

    std::string exp_raw;
    std::optional<std::string> exp_medium, exp_background, exp_region;
    std::optional<double> exp_window;
    auto* ex = app.add_subcommand("experiment", "calibrate, envelope and truncate a raw t,value trace, invert, report c_comp");
    exp_flags.attach(ex);
    ex->add_option("--raw", exp_raw, "raw t,value CSV")->required()->check(CLI::ExistingFile);
    ex->add_option("--medium", exp_medium, "air or ground");
    ex->add_option("--background", exp_background, "background dielectric constant, scalar or [lo,hi]");
    ex->add_option("--region", exp_region, "target region [lo,hi] in x");
    ex->add_option("--window", exp_window, "truncation half-width in t");

    int rep_test = 1;
    auto* rep = app.add_subcommand("reproduce", "simulate then invert one benchmark with the reference parameters");
    rep_flags.attach(rep);
    rep->add_option("-t,--test", rep_test, "benchmark 1..4")->required()->check(CLI::Range(1, 4));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) return run_simulate(sim_flags, sim_test, sim_profile, sim_field);
        if (*inv) return run_invert(inv_flags, inv_g0, inv_g1);
        if (*ex) return run_experiment(exp_flags, exp_raw, exp_medium, exp_background, exp_region, exp_window);
        if (*rep) return run_reproduce(rep_flags, rep_test);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
