#pragma once

// Minimizers for QuadraticSystem: a direct sparse solve of the normal
// equations, plain gradient descent, and gradient projection onto a ball of
// boundary-condition-free fields shifted by a lift function.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>

#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/system.hpp"

namespace carleman {

struct DirectSolveInfo {
    double relative_residual = 0.0;  // ||H z - b|| / ||b|| of the normal equations
    int refinements = 0;
    bool fallback = false;  // supernodal Cholesky failed, simplicial LDL^T used instead
};

namespace detail {

// Solves the normal equations given a solve for the (symmetrically scaled)
// normal matrix, then refines. The residual is taken as A^T (c - A z) rather
// than b - H z, so the rounding in forming H does not limit the accuracy.
// Refinement continues while the corrections keep shrinking, even after the
// residual is small: for ill-conditioned H a tiny residual still leaves
// forward error.
template <class Residual, class Solve>
VectorXd refine(const VectorXd& b, Residual&& residual, Solve&& solve, DirectSolveInfo& info) {
    const double bnorm = std::max(b.norm(), std::numeric_limits<double>::min());
    VectorXd z = solve(b);
    double last_step = std::numeric_limits<double>::infinity();
    int steps = 0;
    for (; steps < 6; ++steps) {
        const VectorXd dz = solve(residual(z));
        const double step = dz.norm();
        if (!std::isfinite(step) || !(step < 0.5 * last_step)) break;
        z += dz;
        last_step = step;
        if (step <= 1e-15 * z.norm()) break;
    }
    info.relative_residual = residual(z).norm() / bnorm;
    info.refinements = steps;
    return z;
}

}  // namespace detail

/// Unique minimizer over the free unknowns, from the normal equations
/// (A^T A) z = A^T b. H = A^T A is scaled to unit diagonal and factored by
/// CHOLMOD's supernodal Cholesky; if that fails (or its answer does not
/// satisfy the normal equations to `fallback_tol`), Eigen's simplicial LDL^T
/// takes over.
inline VectorXd solve_direct(const QuadraticSystem& system, DirectSolveInfo* info = nullptr,
                             double fallback_tol = 1e-6) {
    detail::require(system.free_size() >= 1, "solve_direct: system has no free unknowns");
    const SparseColMatrix& A = system.reduced_matrix();
    const SparseColMatrix H = SparseColMatrix(A.transpose() * A);
    const VectorXd& c = system.reduced_rhs();
    const VectorXd b = A.transpose() * c;
    const auto residual = [&](const VectorXd& z) { return VectorXd(A.transpose() * (c - A * z)); };
    DirectSolveInfo stats;

    const VectorXd d = H.diagonal();
    if ((d.array() <= 0.0).any())
        throw SolverError("solve_direct: an unknown enters no row of the system (zero column)");
    const VectorXd s = d.cwiseSqrt().cwiseInverse();
    const SparseColMatrix Hs = SparseColMatrix(s.asDiagonal() * H * s.asDiagonal());

    VectorXd z;
    {
        Eigen::CholmodSupernodalLLT<SparseColMatrix> llt;
        llt.cholmod().print = 0;
        llt.compute(Hs);
        if (llt.info() == Eigen::Success) {
            z = detail::refine(b, residual, [&](const VectorXd& r) { return VectorXd(s.cwiseProduct(llt.solve(s.cwiseProduct(r)))); },
                               stats);
        }
    }
    if (z.size() == 0 || !z.allFinite() || !(stats.relative_residual <= fallback_tol)) {
        stats.fallback = true;
        Eigen::SimplicialLDLT<SparseColMatrix> ldlt;
        ldlt.compute(Hs);
        if (ldlt.info() != Eigen::Success) throw SolverError("solve_direct: factorization failed");
        if ((ldlt.vectorD().array() <= 0.0).any())
            throw SolverError("solve_direct: normal matrix is not positive definite");
        z = detail::refine(b, residual, [&](const VectorXd& r) { return VectorXd(s.cwiseProduct(ldlt.solve(s.cwiseProduct(r)))); },
                           stats);
    }
    if (!z.allFinite()) throw SolverError("solve_direct: non-finite solution");
    if (info) *info = stats;
    return z;
}

/// Largest eigenvalue of A^T A by power iteration, A the reduced matrix.
inline double normal_matrix_norm(const QuadraticSystem& system, int iterations = 100) {
    const SparseColMatrix& A = system.reduced_matrix();
    VectorXd v = VectorXd::Ones(A.cols()).normalized();
    double mu = 0.0;
    for (int k = 0; k < iterations; ++k) {
        VectorXd w = A.transpose() * (A * v);
        const double next = w.norm();
        if (next == 0.0) return 0.0;
        v = w / next;
        if (std::abs(next - mu) <= 1e-10 * next) return next;
        mu = next;
    }
    return mu;
}

struct DescentResult {
    VectorXd z;                      // final free-unknown values
    std::vector<double> objectives;  // objective before the first step, then after each accepted step
    int steps = 0;
    double eta = 0.0;  // step fraction in use at exit (after any halving)
};

namespace detail {

// Shared loop of gradient descent and gradient projection. `project` maps a
// trial point onto the feasible set (identity for plain descent).
template <class Project>
DescentResult descend(const QuadraticSystem& system, VectorXd z, double eta, int k_max, double grad_tol,
                      Project&& project) {
    require(eta > 0.0 && eta < 1.0, "descent: eta must lie in (0, 1)");
    require(k_max >= 0, "descent: k_max must be nonnegative");
    const double lipschitz = 2.0 * normal_matrix_norm(system);
    DescentResult out;
    out.eta = eta;
    double f = system.objective(z);
    out.objectives.push_back(f);
    if (lipschitz == 0.0) {
        out.z = std::move(z);
        return out;
    }
    int rejected = 0;
    for (int k = 0; k < k_max;) {
        const VectorXd g = system.gradient(z);
        if (g.norm() <= grad_tol) break;
        VectorXd trial = project(VectorXd(z - (out.eta / lipschitz) * g));
        const double f_trial = system.objective(trial);
        if (!std::isfinite(f_trial) || f_trial > f * (1.0 + 1e-14) + 1e-300) {
            if (++rejected >= 3)
                throw SolverError("descent: objective increased on 3 consecutive steps; use a smaller eta");
            out.eta *= 0.5;
            continue;
        }
        rejected = 0;
        z = std::move(trial);
        f = f_trial;
        out.objectives.push_back(f);
        ++k;
        ++out.steps;
    }
    out.z = std::move(z);
    return out;
}

}  // namespace detail

/// Gradient descent z <- z - (eta / L) grad J(z), with L the Lipschitz
/// constant of grad J, so eta in (0, 1) is a fraction of the largest stable
/// step. A step that raises the objective is retried with eta halved.
inline DescentResult gradient_descent(const QuadraticSystem& system, const VectorXd& z_start, double eta = 0.1,
                                      int k_max = 100, double grad_tol = 0.0) {
    detail::require(z_start.size() == system.free_size(), "gradient_descent: start point has the wrong size");
    return detail::descend(system, z_start, eta, k_max, grad_tol, [](VectorXd v) { return v; });
}

/// Closed ball of radius `radius` (the 2R of the iteration) in a given norm.
struct ProjectionBall {
    double radius = 1.0;
    std::function<double(const VectorXd&)> norm = [](const VectorXd& v) { return v.norm(); };

    /// Ball measured in the system's discrete H2 norm.
    static ProjectionBall h2(const QuadraticSystem& system, double radius) {
        detail::require(radius > 0.0, "projection ball: radius must be positive");
        return {radius, [&system](const VectorXd& p) { return system.h2_norm(p); }};
    }
};

/// Identity inside the ball, radial scaling onto its surface outside.
inline VectorXd project_ball(const VectorXd& p, const ProjectionBall& ball) {
    const double n = ball.norm(p);
    if (n <= ball.radius) return p;
    return p * (ball.radius / n);
}

/// F(x, t) = chi(x) (g0(t + eps) + 2 (x - eps) g0'(t + eps)) on the inversion grid.
struct LiftFunction {
    InversionGrid grid;
    std::vector<double> values;

    VectorXd vector() const { return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())); }
};

/// Cutoff equal to 1 on [.., b/4], 0 on [b/2, ..], quintic smoothstep between.
inline double lift_cutoff(double x, double b) {
    const double lo = 0.25 * b;
    const double hi = 0.5 * b;
    if (x <= lo) return 1.0;
    if (x >= hi) return 0.0;
    const double s = (x - lo) / (hi - lo);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

inline LiftFunction build_lift(const BoundaryData& data, const InversionGrid& grid) {
    grid.validate();
    detail::require(data.g1.size() == data.g0.size(), "build_lift: g0' (g1) has not been computed");
    detail::require(grid.eps < 0.25 * grid.xmax, "build_lift: eps must lie left of xmax / 4");
    LiftFunction F{grid, std::vector<double>(grid.size())};
    const UniformAxis xs = grid.space();
    const UniformAxis ts = grid.time();
    for (std::size_t j = 0; j < grid.Mt; ++j) {
        const double t = ts.node(j) + grid.eps;
        const double g0 = data.g0_at(t);
        const double g1 = data.g1_at(t);
        for (std::size_t i = 0; i < grid.Mx; ++i) {
            const double x = xs.node(i);
            F.values[grid.index(i, j)] = lift_cutoff(x, grid.xmax) * (g0 + 2.0 * (x - grid.eps) * g1);
        }
    }
    return F;
}

struct ProjectionResult {
    DescentResult descent;  // descent.z holds q = p + F in free coordinates
    double p_norm = 0.0;    // ball norm of the final p
};

/// Minimizes I(p) = J(p + F) over boundary-condition-free p in the ball by
/// p <- Proj(p - (eta / L) grad I(p)), starting from p = 0.
inline ProjectionResult gradient_projection(const QuadraticSystem& system, const LiftFunction& lift,
                                            const ProjectionBall& ball, double eta = 0.1, int k_max = 100,
                                            double grad_tol = 0.0) {
    detail::require(lift.values.size() == system.dofs.full_size(), "gradient_projection: lift does not match the system grid");
    const DofMap& dofs = system.dofs;
    const VectorXd zF = dofs.restrict(lift.vector());
    // In free coordinates p = P (z - zF); P preserves ties and zeroes fixed nodes.
    const auto p_of = [&](const VectorXd& z) { return VectorXd(dofs.prolongation() * (z - zF)); };
    const auto project = [&](VectorXd z) {
        const VectorXd p = p_of(z);
        const double n = ball.norm(p);
        if (n <= ball.radius) return z;
        return VectorXd(zF + (z - zF) * (ball.radius / n));
    };
    ProjectionResult out;
    out.descent = detail::descend(system, zF, eta, k_max, grad_tol, project);
    out.p_norm = ball.norm(p_of(out.descent.z));
    return out;
}

}  // namespace carleman
