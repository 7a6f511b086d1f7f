#pragma once

// The inversion: Carleman-weighted quasi-reversibility functionals for
// q(x, t) = u(x, t + tau(x)) on [eps, xmax] x [0, T], and the outer iteration
// that linearizes the nonlocal terms around the previous minimizer.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/model.hpp"
#include "carleman/optim.hpp"
#include "carleman/system.hpp"

namespace carleman {

/// q(x_i, t_j) on an InversionGrid, x varying fastest.
struct QField {
    InversionGrid grid;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[grid.index(i, j)]; }
    std::span<const double> line0() const { return {values.data(), grid.Mx}; }
    VectorXd vector() const { return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())); }

    static QField from_vector(const InversionGrid& grid, const VectorXd& q) {
        return {grid, std::vector<double>(q.data(), q.data() + q.size())};
    }

    /// d/dt at (i, j): centered inside, second-order one-sided at t = 0 and t = T.
    double dt_at(std::size_t i, std::size_t j) const {
        const double h = grid.dt();
        const std::size_t n = grid.Mt;
        if (j == 0) return (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * h);
        if (j == n - 1) return (3.0 * at(i, n - 1) - 4.0 * at(i, n - 2) + at(i, n - 3)) / (2.0 * h);
        return (at(i, j + 1) - at(i, j - 1)) / (2.0 * h);
    }
};

/// Admissible range [1 / (2 cmax^(1/4)), 1/2] of q(x, 0).
inline double q0_floor(double cmax) { return 0.5 / std::pow(cmax, 0.25); }

inline double clamp_q0(double q, double cmax) { return std::clamp(q, q0_floor(cmax), 0.5); }

inline std::vector<double> clamp_q0(std::span<const double> line, double cmax) {
    detail::require(cmax > 1.0, "clamp_q0: cmax must exceed 1");
    std::vector<double> out(line.begin(), line.end());
    for (double& v : out) v = clamp_q0(v, cmax);
    return out;
}

/// Derivative of a uniformly sampled line: centered inside, second-order
/// one-sided at both ends.
inline std::vector<double> line_derivative(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    return d;
}

/// c(x) = 1 / (2 q0(x))^4 with q0 the clamped t = 0 line of q; c = 1 off the grid.
inline CoefficientProfile reconstruct_c(const QField& q, double cmax) {
    CoefficientProfile c{q.grid.space(), clamp_q0(q.line0(), cmax), cmax};
    for (double& v : c.values) v = 1.0 / std::pow(2.0 * v, 4);
    return c;
}

namespace detail {

inline void check_data_covers(const BoundaryData& data, const InversionGrid& grid) {
    require(data.g0.size() == data.times.size() && data.times.size() >= 2, "boundary data: g0 is empty or mismatched");
    require(data.g1.size() == data.g0.size(), "boundary data: g1 = g0' has not been computed");
    require(std::abs(data.eps - grid.eps) <= 1e-9 * std::max(1.0, grid.eps),
            "boundary data: measurement point differs from the inversion grid's eps");
    require(data.times.back() >= grid.T + grid.eps - 1e-9,
            "boundary data: g0 must be sampled up to T + eps (" + std::to_string(grid.T + grid.eps) + ")");
}

// Fixes the three boundary conditions by elimination:
//   q(eps, t)   = g0(t + eps)
//   q(eps+dx,t) = g0(t + eps) + dx * 2 g0'(t + eps)     (q_x(eps, t) = 2 g0'(t + eps))
//   q(xmax, t)  = q(xmax - dx, t)                        (q_x(xmax, t) = 0)
inline DofMap boundary_dofs(const BoundaryData& data, const InversionGrid& grid) {
    DofMap dofs(grid.size());
    const double dx = grid.dx();
    const UniformAxis ts = grid.time();
    for (std::size_t j = 0; j < grid.Mt; ++j) {
        const double t = ts.node(j) + grid.eps;
        const double g0 = data.g0_at(t);
        const double g1 = data.g1_at(t);
        dofs.fix(grid.index(0, j), g0);
        dofs.fix(grid.index(1, j), g0 + 2.0 * dx * g1);
        dofs.tie(grid.index(grid.Mx - 1, j), grid.index(grid.Mx - 2, j));
    }
    dofs.finalize();
    return dofs;
}

// Assembles PDE rows  q_xx - k(x) q_xt + s(x, t) = 0  at interior nodes,
// weighted by sqrt(exp(-2 lambda (x + alpha t)) dx dt), followed by the H2
// regularization rows weighted by sqrt(beta). `source` may be empty.
inline QuadraticSystem assemble(const InversionGrid& grid, const CarlemanParams& params, DofMap dofs,
                                std::span<const double> k, std::span<const double> source) {
    const std::size_t mx = grid.Mx;
    const std::size_t mt = grid.Mt;
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double cell = dx * dt;
    const UniformAxis xs = grid.space();
    const UniformAxis ts = grid.time();
    const auto id = [&](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(grid.index(i, j)); };

    const std::size_t n_pde = (mx - 2) * (mt - 2);
    const std::size_t n_reg = mx * mt + (mx - 1) * mt + mx * (mt - 1) + (mx - 2) * mt + mx * (mt - 2) +
                              (mx - 1) * (mt - 1);
    const auto n_rows = static_cast<Eigen::Index>(n_pde + n_reg);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(7 * n_pde + 3 * n_reg);
    VectorXd rhs = VectorXd::Zero(n_rows);
    VectorXd weights(n_rows);
    Eigen::Index r = 0;

    const double cxx = 1.0 / (dx * dx);
    const double cxt = 1.0 / (4.0 * dx * dt);
    for (std::size_t j = 1; j + 1 < mt; ++j) {
        for (std::size_t i = 1; i + 1 < mx; ++i, ++r) {
            trip.emplace_back(r, id(i - 1, j), cxx);
            trip.emplace_back(r, id(i, j), -2.0 * cxx);
            trip.emplace_back(r, id(i + 1, j), cxx);
            const double m = k[i] * cxt;
            trip.emplace_back(r, id(i + 1, j + 1), -m);
            trip.emplace_back(r, id(i + 1, j - 1), m);
            trip.emplace_back(r, id(i - 1, j + 1), m);
            trip.emplace_back(r, id(i - 1, j - 1), -m);
            if (!source.empty()) rhs(r) = -source[grid.index(i, j)];
            weights(r) = std::exp(-params.lambda * (xs.node(i) + params.alpha * ts.node(j))) * std::sqrt(cell);
        }
    }
    const auto pde_rows = r;

    const double wreg = std::sqrt(params.beta);
    for (std::size_t j = 0; j < mt; ++j)
        for (std::size_t i = 0; i < mx; ++i, ++r) trip.emplace_back(r, id(i, j), 1.0);
    for (std::size_t j = 0; j < mt; ++j)
        for (std::size_t i = 0; i + 1 < mx; ++i, ++r) {
            trip.emplace_back(r, id(i + 1, j), 1.0 / dx);
            trip.emplace_back(r, id(i, j), -1.0 / dx);
        }
    for (std::size_t j = 0; j + 1 < mt; ++j)
        for (std::size_t i = 0; i < mx; ++i, ++r) {
            trip.emplace_back(r, id(i, j + 1), 1.0 / dt);
            trip.emplace_back(r, id(i, j), -1.0 / dt);
        }
    for (std::size_t j = 0; j < mt; ++j)
        for (std::size_t i = 1; i + 1 < mx; ++i, ++r) {
            trip.emplace_back(r, id(i - 1, j), cxx);
            trip.emplace_back(r, id(i, j), -2.0 * cxx);
            trip.emplace_back(r, id(i + 1, j), cxx);
        }
    const double ctt = 1.0 / (dt * dt);
    for (std::size_t j = 1; j + 1 < mt; ++j)
        for (std::size_t i = 0; i < mx; ++i, ++r) {
            trip.emplace_back(r, id(i, j - 1), ctt);
            trip.emplace_back(r, id(i, j), -2.0 * ctt);
            trip.emplace_back(r, id(i, j + 1), ctt);
        }
    const double cc = 1.0 / (dx * dt);
    for (std::size_t j = 0; j + 1 < mt; ++j)
        for (std::size_t i = 0; i + 1 < mx; ++i, ++r) {
            trip.emplace_back(r, id(i + 1, j + 1), cc);
            trip.emplace_back(r, id(i + 1, j), -cc);
            trip.emplace_back(r, id(i, j + 1), -cc);
            trip.emplace_back(r, id(i, j), cc);
        }
    weights.tail(n_rows - pde_rows).setConstant(wreg);

    QuadraticSystem sys;
    sys.grid = grid;
    sys.rows.resize(n_rows, static_cast<Eigen::Index>(grid.size()));
    sys.rows.setFromTriplets(trip.begin(), trip.end());
    sys.rhs = std::move(rhs);
    sys.weights = std::move(weights);
    sys.pde_rows = pde_rows;
    sys.beta = params.beta;
    sys.cell = cell;
    sys.dofs = std::move(dofs);
    sys.finalize();
    return sys;
}

}  // namespace detail

/// Functional for the first approximation: PDE rows q_xx - 2 q_xt = 0.
inline QuadraticSystem assemble_functional_0(const BoundaryData& data, const CarlemanParams& params,
                                             const InversionGrid& grid) {
    params.validate();
    grid.validate();
    detail::check_data_covers(data, grid);
    const std::vector<double> k(grid.Mx, 2.0);
    return detail::assemble(grid, params, detail::boundary_dofs(data, grid), k, {});
}

struct LinearizationOptions {
    bool clamp = true;           // clamp q_prev(x, 0) into its admissible range before use
    double cmax = 16.0;
    double q0_safety_floor = 1e-3;  // below this the coefficients are considered blown up
};

/// Coefficients of the linearized operator at q_prev:
///   k(x)    = 1 / (2 q0(x)^2)
///   s(x, t) = d_t q_prev(x, t) * d_x q_prev(x, 0) / (2 q0(x)^3)
/// with q0 the (optionally clamped) t = 0 line of q_prev.
struct Linearization {
    std::vector<double> k;
    std::vector<double> source;
};

inline Linearization linearize(const QField& q_prev, const LinearizationOptions& opt) {
    const InversionGrid& grid = q_prev.grid;
    const auto line = q_prev.line0();
    std::vector<double> q0(line.begin(), line.end());
    if (opt.clamp) q0 = clamp_q0(line, opt.cmax);
    for (double v : q0)
        if (!(v >= opt.q0_safety_floor))
            throw SolverError("linearization: q(x, 0) = " + std::to_string(v) + " is below the safety floor");
    const std::vector<double> dq0 = line_derivative(line, grid.dx());

    Linearization lin{std::vector<double>(grid.Mx), std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < grid.Mx; ++i) lin.k[i] = 1.0 / (2.0 * q0[i] * q0[i]);
    for (std::size_t j = 0; j < grid.Mt; ++j)
        for (std::size_t i = 0; i < grid.Mx; ++i)
            lin.source[grid.index(i, j)] = q_prev.dt_at(i, j) * dq0[i] / (2.0 * q0[i] * q0[i] * q0[i]);
    return lin;
}

/// Functional of iteration n, linearized around the previous minimizer.
inline QuadraticSystem assemble_functional_n(const QField& q_prev, const BoundaryData& data,
                                             const CarlemanParams& params, const LinearizationOptions& opt = {}) {
    params.validate();
    const InversionGrid& grid = q_prev.grid;
    grid.validate();
    detail::check_data_covers(data, grid);
    const Linearization lin = linearize(q_prev, opt);
    return detail::assemble(grid, params, detail::boundary_dofs(data, grid), lin.k, lin.source);
}

enum class SolverKind { Direct, GradientDescent, GradientProjection };

inline const char* to_string(SolverKind s) {
    switch (s) {
        case SolverKind::Direct: return "direct";
        case SolverKind::GradientDescent: return "gd";
        case SolverKind::GradientProjection: return "gp";
    }
    return "?";
}

inline SolverKind parse_solver(const std::string& s) {
    if (s == "direct") return SolverKind::Direct;
    if (s == "gd") return SolverKind::GradientDescent;
    if (s == "gp") return SolverKind::GradientProjection;
    throw InputError("unknown solver '" + s + "' (expected direct, gd or gp)");
}

struct AlgorithmOptions {
    SolverKind solver = SolverKind::Direct;
    double tol = 1e-3;  // stop once the consecutive relative error drops below this
    bool clamp = true;
    double cmax = 16.0;
    double eta = 0.1;
    int k_max = 2000;
    double radius_factor = 10.0;  // R = radius_factor * ||F||, F the lift; the ball has radius 2R
    /// Called after every completed iteration (including n = 0).
    std::function<void(const struct IterationRecord&)> observer;
};

struct IterationRecord {
    int iter = 0;
    CoefficientProfile c;
    double consec_err = std::numeric_limits<double>::quiet_NaN();  // undefined for n = 0
    double objective = 0.0;
    double grad_norm = 0.0;
    double seconds = 0.0;
    double radius_ratio = std::numeric_limits<double>::quiet_NaN();  // ||q_n - F|| / R, gp only
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    CoefficientProfile c_comp;
    QField q_comp;
    bool converged = false;
};

/// ||a - b||_inf / ||a||_inf.
inline double consecutive_relative_error(const CoefficientProfile& current, const CoefficientProfile& previous) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < current.values.size(); ++k) {
        num = std::max(num, std::abs(current.values[k] - previous.values[k]));
        den = std::max(den, std::abs(current.values[k]));
    }
    return num / den;
}

/// Runs the outer iteration: q_0 from the n = 0 functional, then q_n from the
/// functional linearized at q_{n-1}, until the consecutive relative error of
/// c_n falls below tol or n_iters iterations have run.
inline IterationTrace run_algorithm(const BoundaryData& data, const CarlemanParams& params,
                                    const InversionGrid& grid, const AlgorithmOptions& opt = {}) {
    params.validate();
    grid.validate();
    detail::check_data_covers(data, grid);
    for (std::size_t k = 0; k < data.g0.size(); ++k)
        if (!std::isfinite(data.g0[k]) || !std::isfinite(data.g1[k]))
            throw InputError("run_algorithm: boundary data contains non-finite samples");

    using clock = std::chrono::steady_clock;
    IterationTrace trace;
    std::optional<LiftFunction> lift;
    double big_r = 0.0;

    const auto minimize = [&](const QuadraticSystem& sys, const QField* previous, int n, IterationRecord& rec) {
        VectorXd z;
        switch (opt.solver) {
            case SolverKind::Direct:
                z = solve_direct(sys);
                break;
            case SolverKind::GradientDescent: {
                if (!lift) lift = build_lift(data, grid);
                const VectorXd start = previous ? sys.dofs.restrict(previous->vector()) : sys.dofs.restrict(lift->vector());
                z = gradient_descent(sys, start, opt.eta, opt.k_max).z;
                break;
            }
            case SolverKind::GradientProjection: {
                if (!lift) lift = build_lift(data, grid);
                if (big_r == 0.0) big_r = opt.radius_factor * std::max(sys.h2_norm(lift->vector()), 1e-300);
                const ProjectionBall ball = ProjectionBall::h2(sys, 2.0 * big_r);
                const ProjectionResult res = gradient_projection(sys, *lift, ball, opt.eta, opt.k_max);
                z = res.descent.z;
                rec.radius_ratio = res.p_norm / big_r;
                break;
            }
        }
        if (!z.allFinite()) throw SolverError("minimizer returned non-finite values", n);
        rec.objective = sys.objective(z);
        rec.grad_norm = sys.gradient(z).norm();
        return QField::from_vector(grid, sys.dofs.expand(z));
    };

    const auto record = [&](IterationRecord rec, const QField& q, clock::time_point start) {
        rec.c = reconstruct_c(q, opt.cmax);
        for (double v : rec.c.values)
            if (!std::isfinite(v)) throw SolverError("reconstructed coefficient is not finite", rec.iter);
        if (!trace.records.empty()) rec.consec_err = consecutive_relative_error(rec.c, trace.records.back().c);
        rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
        trace.records.push_back(std::move(rec));
        if (opt.observer) opt.observer(trace.records.back());
    };

    QField q;
    try {
        const auto start = clock::now();
        IterationRecord rec;
        rec.iter = 0;
        const QuadraticSystem sys0 = assemble_functional_0(data, params, grid);
        q = minimize(sys0, nullptr, 0, rec);
        record(std::move(rec), q, start);
    } catch (const SolverError& e) {
        if (e.iteration() >= 0) throw;
        throw SolverError(e.what(), 0);
    }

    const LinearizationOptions lin{opt.clamp, opt.cmax};
    for (int n = 1; n <= params.n_iters; ++n) {
        try {
            const auto start = clock::now();
            IterationRecord rec;
            rec.iter = n;
            const QuadraticSystem sys = assemble_functional_n(q, data, params, lin);
            q = minimize(sys, &q, n, rec);
            record(std::move(rec), q, start);
        } catch (const SolverError& e) {
            if (e.iteration() >= 0) throw;
            throw SolverError(e.what(), n);
        }
        if (trace.records.back().consec_err < opt.tol) {
            trace.converged = true;
            break;
        }
    }
    trace.c_comp = trace.records.back().c;
    trace.q_comp = q;
    return trace;
}

}  // namespace carleman
