#pragma once

// Implicit finite-difference solver for c(x) u_tt = u_xx on [-a, a] with
// first-order absorbing rows, and the boundary-data operators built on it.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "carleman/error.hpp"
#include "carleman/model.hpp"

namespace carleman {

/// u(x_i, t_j) on a ForwardGrid, stored time-major (row j is the snapshot at t_j).
struct WaveField {
    ForwardGrid grid;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[j * grid.Nx + i]; }
    std::span<const double> snapshot(std::size_t j) const {
        return {values.data() + j * grid.Nx, grid.Nx};
    }
};

/// Time series of u(eps, t) and u_x(eps, t). g1 stays empty until computed.
struct BoundaryData {
    double eps = 0.0;
    std::vector<double> times;
    std::vector<double> g0;
    std::vector<double> g1;
    double noise_level = 0.0;

    double dt() const { return times[1] - times[0]; }

    /// Linear interpolation of a sampled series; clamps past the ends.
    static double interpolate(std::span<const double> times, std::span<const double> values, double t) {
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        const double step = times[1] - times[0];
        const auto k = std::min(static_cast<std::size_t>((t - times.front()) / step), times.size() - 2);
        const double w = (t - times[k]) / step;
        return (1.0 - w) * values[k] + w * values[k + 1];
    }

    double g0_at(double t) const { return interpolate(times, g0, t); }
    double g1_at(double t) const { return interpolate(times, g1, t); }
};

namespace detail {

// Solves a tridiagonal system in place (Thomas algorithm). lower[0] and
// upper[n-1] are ignored. `rhs` receives the solution.
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs,
                              std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    double pivot = diag[0];
    if (pivot == 0.0) throw SolverError("forward solver: singular tridiagonal system");
    scratch[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if (pivot == 0.0 || !std::isfinite(pivot))
            throw SolverError("forward solver: singular tridiagonal system");
        scratch[i] = i + 1 < n ? upper[i] / pivot : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

}  // namespace detail

/// Marches c u_tt = u_xx from u(x,0) = 0, u_t(x,0) = smoothed_delta(x).
///
/// Interior rows couple the centered time difference with the spatial
/// second difference at the new level:
///   c_i (u^{j+1} - 2u^j + u^{j-1}) / dt^2 = (u^{j+1}_{i+1} - 2u^{j+1}_i + u^{j+1}_{i-1}) / dx^2.
/// The ends carry u_t - u_x = 0 at -a and u_t + u_x = 0 at +a, with backward
/// time and one-sided space differences. The first step is u^1 = dt * delta.
///
/// `c` is sampled by linear interpolation at the forward nodes, with c = 1
/// outside its axis. Set `warnings` to collect resolution diagnostics.
inline WaveField solve_forward(const CoefficientProfile& c, const ForwardGrid& grid,
                               std::vector<std::string>* warnings = nullptr) {
    grid.validate();
    const std::size_t nx = grid.Nx;
    const double dx = grid.dx();
    const double dt = grid.dt();
    if (warnings && dx > 1.0 / 150.0)
        warnings->push_back("forward grid dx = " + std::to_string(dx) +
                            " does not resolve the smoothed source (need dx <= 1/150)");

    const UniformAxis xs = grid.space();
    std::vector<double> coef(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        coef[i] = c.at(xs.node(i));
        detail::require(coef[i] > 0.0, "solve_forward: coefficient must be positive");
    }

    WaveField u{grid, std::vector<double>(nx * grid.Nt, 0.0)};
    for (std::size_t i = 0; i < nx; ++i) u.values[nx + i] = dt * smoothed_delta(xs.node(i));

    const double r = dt * dt / (dx * dx);
    const double rho = dt / dx;
    std::vector<double> lower(nx, -r), diag(nx), upper(nx, -r), rhs(nx), scratch;
    for (std::size_t i = 1; i + 1 < nx; ++i) diag[i] = coef[i] + 2.0 * r;
    diag[0] = 1.0 + rho;
    upper[0] = -rho;
    diag[nx - 1] = 1.0 + rho;
    lower[nx - 1] = -rho;

    for (std::size_t j = 1; j + 1 < grid.Nt; ++j) {
        const double* now = u.values.data() + j * nx;
        const double* prev = now - nx;
        rhs[0] = now[0];
        rhs[nx - 1] = now[nx - 1];
        for (std::size_t i = 1; i + 1 < nx; ++i) rhs[i] = coef[i] * (2.0 * now[i] - prev[i]);
        detail::solve_tridiagonal(lower, diag, upper, rhs, scratch);
        std::copy(rhs.begin(), rhs.end(), u.values.begin() + static_cast<std::ptrdiff_t>((j + 1) * nx));
    }
    return u;
}

/// Samples g0(t) = u(eps, t) at the spatial node nearest to eps.
/// The returned data's `eps` is the snapped node position.
inline BoundaryData extract_boundary_data(const WaveField& u, double eps) {
    const UniformAxis xs = u.grid.space();
    detail::require(xs.contains(eps), "extract_boundary_data: eps outside the forward grid");
    const std::size_t i = xs.nearest(eps);
    BoundaryData data;
    data.eps = xs.node(i);
    data.times = u.grid.time().nodes();
    data.g0.resize(u.grid.Nt);
    for (std::size_t j = 0; j < u.grid.Nt; ++j) data.g0[j] = u.at(i, j);
    return data;
}

/// Replaces g0 by its exact limit 1/2 on [0, t_window], provided the
/// measurement point lies within x_window of the source.
inline BoundaryData correct_near_origin(BoundaryData data, double x_window = 0.0067,
                                        double t_window = 0.26) {
    if (data.eps > x_window + 1e-12) return data;
    for (std::size_t j = 0; j < data.times.size(); ++j)
        if (data.times[j] <= t_window + 1e-12) data.g0[j] = 0.5;
    return data;
}

/// Uniform draws on [-1, 1) from a seeded 64-bit Mersenne twister. The top
/// 53 bits of each output form the mantissa, so sequences are identical on
/// every platform for a given seed.
class UniformNoise {
public:
    explicit UniformNoise(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return 2.0 * unit - 1.0;
    }

private:
    std::mt19937_64 engine_;
};

/// Multiplicative noise g0 <- g0 (1 + delta * rand), rand uniform on [-1, 1].
inline BoundaryData add_noise(BoundaryData data, double delta, std::uint64_t seed) {
    detail::require(delta >= 0.0, "add_noise: noise level must be nonnegative");
    data.noise_level = delta;
    if (delta == 0.0) return data;
    UniformNoise rand(seed);
    for (double& v : data.g0) v *= 1.0 + delta * rand();
    return data;
}

}  // namespace carleman
