// Runs the ten acceptance checks at paper resolution and prints one
// PASS/FAIL line per check. Exit status is nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "carleman/carleman.hpp"
#include "carleman/pipeline.hpp"

using namespace carleman;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("%s %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Peak {
    double value = -1.0;
    double x = 0.0;
};

Peak peak_in(const CoefficientProfile& c, double lo, double hi) {
    Peak p;
    for (std::size_t k = 0; k < c.axis.size; ++k) {
        const double x = c.axis.node(k);
        if (x >= lo && x <= hi && c.values[k] > p.value) p = {c.values[k], x};
    }
    return p;
}

struct Run {
    IterationTrace trace;
    double seconds = 0.0;
};

Run run_test(int test, double delta = 0.05) {
    RunConfig cfg;
    cfg.test = test;
    cfg.delta = delta;
    const auto t0 = std::chrono::steady_clock::now();
    const Simulation sim = simulate(cfg);
    Run r;
    r.trace = invert(cfg, sim.data);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Iteration count at which consecutive error first drops below tol, or -1.
int iterations_to(const IterationTrace& t, double tol) {
    for (const auto& r : t.records)
        if (r.iter >= 1 && r.consec_err < tol) return r.iter;
    return -1;
}

std::string consec_list(const IterationTrace& t) {
    std::string s;
    for (const auto& r : t.records)
        if (r.iter >= 1) s += fmt("%s%.3g", s.empty() ? "" : " ", r.consec_err);
    return s;
}

// From iteration 2 up to the first one under tol, each error beats the last.
bool contracts(const IterationTrace& t, double tol) {
    double prev = INFINITY;
    bool reached = false;
    for (const auto& r : t.records) {
        if (r.iter < 2) continue;
        if (!(r.consec_err < prev)) return false;
        prev = r.consec_err;
        if (r.consec_err < tol) {
            reached = true;
            break;
        }
    }
    return reached;
}

void check_test1(const Run& r) {
    const Peak p = peak_in(r.trace.c_comp, 0.0, 3.0);
    const int n = iterations_to(r.trace, 1e-2);
    const bool ok = p.value >= 13.5 && p.value <= 16.5 && std::abs(p.x - 1.0) <= 0.05 && n >= 1 && n <= 10 &&
                    r.seconds <= 120.0;
    report(1, ok,
           fmt("test 1: max %.3f at x=%.3f, consecutive error < 1e-2 at iteration %d, %.1f s", p.value, p.x, n,
               r.seconds));
}

void check_test2(const Run& r) {
    const Peak a = peak_in(r.trace.c_comp, 0.4, 0.8);
    const Peak b = peak_in(r.trace.c_comp, 1.1, 1.7);
    const int n = iterations_to(r.trace, 1e-2);
    const bool ok = std::abs(a.value - 6.0) <= 1.2 && std::abs(b.value - 9.0) <= 1.8 && n >= 1 && n <= 10;
    report(2, ok,
           fmt("test 2: peaks %.3f at x=%.3f (true 6), %.3f at x=%.3f (true 9), converged at iteration %d", a.value,
               a.x, b.value, b.x, n));
}

void check_test3(const Run& r) {
    const CoefficientProfile& c = r.trace.c_comp;
    const Peak p = peak_in(c, 0.0, 3.0);
    // half-maximum support around the peak
    const double half = 0.5 * (1.0 + p.value);
    const std::size_t k0 = c.axis.nearest(p.x);
    std::size_t lo = k0, hi = k0;
    while (lo > 0 && c.values[lo - 1] >= half) --lo;
    while (hi + 1 < c.axis.size && c.values[hi + 1] >= half) ++hi;
    const double xl = c.axis.node(lo), xr = c.axis.node(hi);
    const bool ok = std::abs(p.value - 10.0) <= 1.5 && std::abs(xl - 0.85) <= 0.05 && std::abs(xr - 1.15) <= 0.05;
    report(3, ok,
           fmt("test 3: max %.3f at x=%.3f, half-maximum plateau [%.3f, %.3f] vs [0.85, 1.15]", p.value, p.x, xl, xr));
}

void check_test4(const Run& r) {
    const Peak p = peak_in(r.trace.c_comp, 1.63, 2.37);
    const Peak seen = peak_in(r.trace.c_comp, 1.63, 1.83);
    const bool ok = std::abs(p.value - 8.0) <= 0.8;
    report(4, ok,
           fmt("test 4: inclusion max %.3f at x=%.3f (true 8); over the part reached by data (x <= 1.83) %.3f",
               p.value, p.x, seen.value));
}

void check_homogeneous() {
    const Run r = run_test(0, 0.0);
    double err = 0.0;
    for (double v : r.trace.c_comp.values) err = std::max(err, std::abs(v - 1.0));
    report(5, err <= 0.02, fmt("noiseless c = 1: max |c_comp - 1| = %.4f", err));
}

void check_plateau() {
    RunConfig cfg;
    cfg.test = 0;
    cfg.delta = 0.0;
    const ForwardGrid g = extended_forward_grid(cfg);
    const WaveField u = solve_forward(constant_profile(1.0, g.space()), g);
    const BoundaryData d = extract_boundary_data(u, cfg.eps);
    const double T = cfg.forward.T;
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < d.times.size(); ++k) {
        const double t = d.times[k];
        if (t <= d.eps + 0.3 || t >= T - 0.5) continue;
        lo = std::min(lo, d.g0[k]);
        hi = std::max(hi, d.g0[k]);
    }
    report(6, lo >= 0.475 && hi <= 0.525,
           fmt("forward plateau: g0 in [%.4f, %.4f] for t in (%.4f, %.1f)", lo, hi, d.eps + 0.3, T - 0.5));
}

BoundaryData wavy_data(const InversionGrid& g) {
    BoundaryData d;
    d.eps = g.eps;
    for (double t = 0.0; t <= g.T + g.eps + 0.05; t += 0.01) {
        d.times.push_back(t);
        d.g0.push_back(0.5 + 0.1 * std::sin(3.0 * t) * std::exp(-t));
        d.g1.push_back(0.1 * std::exp(-t) * (3.0 * std::cos(3.0 * t) - std::sin(3.0 * t)));
    }
    return d;
}

QuadraticSystem small_system(double beta, std::size_t mx, std::size_t mt) {
    const InversionGrid g{0.02, 1.0, 1.5, mx, mt};
    CarlemanParams p;
    p.beta = beta;
    QField prev{g, std::vector<double>(g.size())};
    for (std::size_t j = 0; j < g.Mt; ++j)
        for (std::size_t i = 0; i < g.Mx; ++i)
            prev.values[g.index(i, j)] = 0.45 - 0.1 * std::sin(2.0 * g.space().node(i)) * std::cos(g.time().node(j));
    return assemble_functional_n(prev, wavy_data(g), p);
}

VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v(k) = u(rng);
    return v;
}

void check_optimality() {
    const QuadraticSystem s = small_system(1e-4, 14, 12);
    std::mt19937_64 rng(21);
    double fd_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const VectorXd z = random_vector(s.free_size(), rng, 0.2, 0.6);
        const VectorXd v = random_vector(s.free_size(), rng, -1.0, 1.0).normalized();
        const double h = 1e-4;
        const double fd = (s.objective(z + h * v) - s.objective(z - h * v)) / (2.0 * h);
        const double an = s.gradient(z).dot(v);
        fd_err = std::max(fd_err, std::abs(an - fd) / std::abs(an));
    }

    double svd_err = 0.0;
    for (double beta : {1e-3, 1e-6, 1e-11}) {
        const QuadraticSystem t = small_system(beta, 14, 12);
        const Eigen::MatrixXd A = Eigen::MatrixXd(t.reduced_matrix());
        const VectorXd oracle = A.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(t.reduced_rhs());
        svd_err = std::max(svd_err, (solve_direct(t) - oracle).norm() / oracle.norm());
    }

    const QuadraticSystem g = small_system(1e-2, 8, 6);
    const VectorXd m = solve_direct(g);
    const DescentResult r = gradient_descent(g, VectorXd::Constant(g.free_size(), 0.5), 0.5, 20000);
    const double gd_gap = std::abs(g.objective(r.z) - g.objective(m)) / g.objective(m);

    report(7, fd_err <= 1e-6 && svd_err <= 1e-8 && gd_gap <= 1e-4,
           fmt("optimality: gradient vs central differences %.2e (20 points, %td unknowns), direct vs dense SVD "
               "%.2e, descent objective gap %.2e",
               fd_err, s.free_size(), svd_err, gd_gap));
}

void check_contraction(const std::vector<const Run*>& runs, double tol) {
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const bool c = contracts(runs[k]->trace, tol);
        ok = ok && c;
        detail += fmt("%stest %zu %s [%s]", k ? "; " : "", k + 1, c ? "ok" : "breaks", consec_list(runs[k]->trace).c_str());
    }
    report(8, ok, "consecutive errors decrease from iteration 2: " + detail);
}

// Sign change of neighbouring differences, three largest |value|, middle one decides.
EnvelopeSide scan_side(const std::vector<double>& f) {
    struct E {
        std::size_t k;
        double v;
        bool max;
    };
    std::vector<E> all;
    for (std::size_t k = 1; k + 1 < f.size(); ++k) {
        const double l = f[k] - f[k - 1], r = f[k + 1] - f[k];
        if (l > 0 && r < 0) all.push_back({k, f[k], true});
        if (l < 0 && r > 0) all.push_back({k, f[k], false});
    }
    std::stable_sort(all.begin(), all.end(), [](const E& a, const E& b) { return std::abs(a.v) > std::abs(b.v); });
    all.resize(3);
    std::sort(all.begin(), all.end(), [](const E& a, const E& b) { return a.k < b.k; });
    return all[1].max ? EnvelopeSide::Upper : EnvelopeSide::Lower;
}

void check_preprocessing() {
    const UniformAxis ax{0.0, 0.01, 301};
    CoefficientProfile c{ax, std::vector<double>(ax.size)};
    for (std::size_t k = 0; k < ax.size; ++k) c.values[k] = std::abs(ax.node(k) - 1.0) < 0.1 ? 16.0 : 4.0;
    const RelativeDielectric box = relative_dielectric(c, {{3.0, 5.0}, {0.5, 1.5}, Medium::Air});
    const double ratio = peak_in(box.c_rel, 0.5, 1.5).value;
    const std::string row = interval_report(box.c_comp);

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> freq(0.5, 4.0), damp(0.1, 2.0), phase(0.0, 2.0 * std::numbers::pi),
        amp(-5.0, 5.0), shift(0.0, 1.5);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double w = freq(rng), d = damp(rng), p = phase(rng), a = amp(rng), s = shift(rng);
        TimeSeries f;
        for (std::size_t k = 0; k <= 800; ++k) {
            const double t = 0.005 * static_cast<double>(k);
            f.times.push_back(t);
            f.values.push_back(a * std::sin(2.0 * std::numbers::pi * w * t + p) * std::exp(-d * std::abs(t - s)));
        }
        agree += select_envelope(f) == scan_side(f.values);
    }
    report(9, fmt("%.2f", ratio) == "4.00" && row == "[12.00, 20.00]" && agree == 100,
           fmt("metal box: ratio %.2f, c_comp %s; envelope side matches the scan on %d/100 oscillations", ratio,
               row.c_str(), agree));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void check_determinism() {
    const fs::path root = fs::temp_directory_path() / ("carleman_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    bool ran = true;
    for (const char* name : {"a", "b"}) {
        const std::string cmd = std::string(CARLEMAN_CLI_PATH) + " reproduce --test 1 -q -o " + (root / name).string() +
                                " > " + (root.string() + "_" + name + ".log") + " 2>&1";
        ran = ran && std::system(cmd.c_str()) == 0;
    }
    std::size_t files = 0, differ = 0;
    if (ran) {
        for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
            if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
            ++files;
            const fs::path other = root / "b" / fs::relative(e.path(), root / "a");
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
        }
    }
    report(10, ran && files > 0 && differ == 0,
           ran ? fmt("reproduce --test 1 twice: %zu CSV files, %zu differ", files, differ)
               : std::string("reproduce --test 1 did not exit cleanly"));
    fs::remove_all(root);
    fs::remove(root.string() + "_a.log");
    fs::remove(root.string() + "_b.log");
}

}  // namespace

int main() {
    try {
        const Run t1 = run_test(1);
        check_test1(t1);
        const Run t2 = run_test(2);
        check_test2(t2);
        const Run t3 = run_test(3);
        check_test3(t3);
        const Run t4 = run_test(4);
        check_test4(t4);
        check_homogeneous();
        check_plateau();
        check_optimality();
        check_contraction({&t1, &t2, &t3, &t4}, RunConfig{}.tol);
        check_preprocessing();
        check_determinism();
    } catch (const std::exception& e) {
        std::printf("FAIL: aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
