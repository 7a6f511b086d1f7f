#pragma once

// Grids, coefficient profiles and the small closed-form primitives shared by
// the forward solver and the inversion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "carleman/error.hpp"

namespace carleman {

/// Uniformly spaced 1D axis: node k sits at start + k * step.
struct UniformAxis {
    double start = 0.0;
    double step = 1.0;
    std::size_t size = 0;

    double node(std::size_t k) const { return start + static_cast<double>(k) * step; }
    double back() const { return node(size - 1); }

    /// Index of the node nearest to x (clamped into range).
    std::size_t nearest(double x) const {
        const double k = std::round((x - start) / step);
        if (k <= 0.0) return 0;
        if (k >= static_cast<double>(size - 1)) return size - 1;
        return static_cast<std::size_t>(k);
    }

    bool contains(double x, double slack = 1e-12) const {
        return x >= start - slack * step && x <= back() + slack * step;
    }

    std::vector<double> nodes() const {
        std::vector<double> out(size);
        for (std::size_t k = 0; k < size; ++k) out[k] = node(k);
        return out;
    }
};

/// Space-time grid for the truncated forward problem on [-a, a] x [0, T].
struct ForwardGrid {
    double a = 5.0;
    double T = 6.0;
    std::size_t Nx = 3001;
    std::size_t Nt = 301;

    void validate() const {
        detail::require(a > 0.0, "forward grid: a must be positive");
        detail::require(T > 0.0, "forward grid: T must be positive");
        detail::require(Nx >= 3, "forward grid: Nx must be at least 3");
        detail::require(Nt >= 3, "forward grid: Nt must be at least 3");
    }

    double dx() const { return 2.0 * a / static_cast<double>(Nx - 1); }
    double dt() const { return T / static_cast<double>(Nt - 1); }
    UniformAxis space() const { return {-a, dx(), Nx}; }
    UniformAxis time() const { return {0.0, dt(), Nt}; }
};

/// Rectangle [eps, xmax] x [0, T] on which q(x, t) is reconstructed.
struct InversionGrid {
    double eps = 0.0066666666666666671;
    double xmax = 3.0;
    double T = 6.0;
    std::size_t Mx = 908;  // spacing close to 0.0033
    std::size_t Mt = 301;

    void validate() const {
        detail::require(eps > 0.0 && eps < xmax, "inversion grid: need 0 < eps < xmax");
        detail::require(T > 0.0, "inversion grid: T must be positive");
        detail::require(Mx >= 4, "inversion grid: Mx must be at least 4");
        detail::require(Mt >= 3, "inversion grid: Mt must be at least 3");
    }

    double dx() const { return (xmax - eps) / static_cast<double>(Mx - 1); }
    double dt() const { return T / static_cast<double>(Mt - 1); }
    UniformAxis space() const { return {eps, dx(), Mx}; }
    UniformAxis time() const { return {0.0, dt(), Mt}; }
    std::size_t size() const { return Mx * Mt; }
    /// Flat index of node (i, j); x varies fastest.
    std::size_t index(std::size_t i, std::size_t j) const { return j * Mx + i; }

    /// Grid with nodes spaced as close as possible to (dx, dt).
    static InversionGrid with_spacing(double eps, double xmax, double T, double dx, double dt) {
        InversionGrid g;
        g.eps = eps;
        g.xmax = xmax;
        g.T = T;
        g.Mx = static_cast<std::size_t>(std::lround((xmax - eps) / dx)) + 1;
        g.Mt = static_cast<std::size_t>(std::lround(T / dt)) + 1;
        g.validate();
        return g;
    }
};

/// Dielectric constant c(x) sampled on a uniform axis.
struct CoefficientProfile {
    UniformAxis axis;
    std::vector<double> values;
    double cmax = 16.0;

    double max() const {
        double m = values.front();
        for (double v : values) m = std::max(m, v);
        return m;
    }

    std::size_t argmax() const {
        std::size_t k = 0;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[k]) k = i;
        return k;
    }

    /// Linear interpolation; c = 1 outside the sampled axis.
    double at(double x) const {
        if (!axis.contains(x)) return 1.0;
        const double s = (x - axis.start) / axis.step;
        const auto k = std::min(static_cast<std::size_t>(std::max(s, 0.0)), axis.size - 2);
        const double w = s - static_cast<double>(k);
        return (1.0 - w) * values[k] + w * values[k + 1];
    }
};

/// Weight and regularization parameters of the Carleman functionals.
struct CarlemanParams {
    double lambda = 2.0;
    double alpha = 0.3;
    double beta = 1e-11;
    int n_iters = 10;

    void validate() const {
        detail::require(lambda > 1.0, "lambda must exceed 1");
        detail::require(alpha > 0.0 && alpha < 0.5, "alpha must lie in (0, 1/2)");
        detail::require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
        detail::require(n_iters >= 1, "n_iters must be at least 1");
    }
};

namespace detail {

// exp((x-center)^2 / ((x-center)^2 - r^2)) on |x-center| < r, else 0.
inline double bump(double x, double center, double r) {
    const double d2 = (x - center) * (x - center);
    if (d2 >= r * r) return 0.0;
    return std::exp(d2 / (d2 - r * r));
}

}  // namespace detail

/// Closed-form c_true(x) of the four synthetic benchmarks.
inline double true_coefficient(int kind, double x) {
    switch (kind) {
        case 1:
            return 1.0 + 14.0 * detail::bump(x, 1.0, 0.2);
        case 2:
            return 1.0 + 5.0 * detail::bump(x, 0.6, 0.2) + 8.0 * detail::bump(x, 1.4, 0.3);
        case 3:
            return std::abs(x - 1.0) < 0.15 ? 10.0 : 1.0;
        case 4:
            if (std::abs(x - 0.9) < 0.5) return 3.5 + 0.3 * std::sin(std::numbers::pi * (x - 1.35));
            if (std::abs(x - 2.0) < 0.37) return 8.0;
            return 1.0;
        default:
            throw InputError("unknown test profile id " + std::to_string(kind) + " (expected 1..4)");
    }
}

inline CoefficientProfile make_true_profile(int kind, const UniformAxis& axis, double cmax = 16.0) {
    CoefficientProfile c{axis, std::vector<double>(axis.size), cmax};
    for (std::size_t k = 0; k < axis.size; ++k) c.values[k] = true_coefficient(kind, axis.node(k));
    return c;
}

inline CoefficientProfile constant_profile(double value, const UniformAxis& axis, double cmax = 16.0) {
    return {axis, std::vector<double>(axis.size, value), cmax};
}

/// tau(x) = int_0^x sqrt(c), composite trapezoid on the profile's nodes.
/// Nodes left of the axis (when the axis starts past 0) count as c = 1.
inline double travel_time(const CoefficientProfile& c, double x) {
    const UniformAxis& ax = c.axis;
    detail::require(x >= 0.0, "travel_time: x must be nonnegative");
    detail::require(x <= ax.back() + 1e-12 * ax.step, "travel_time: x beyond the profile grid");
    const auto root = [&](double v) {
        detail::require(v > 0.0, "travel_time: coefficient must be positive");
        return std::sqrt(v);
    };

    double tau = 0.0;
    double left = 0.0;
    if (ax.start > 0.0) {
        if (x <= ax.start) return x;
        tau = ax.start;
        left = ax.start;
    }
    // first node at or right of `left`
    auto k = static_cast<std::size_t>(std::max(0.0, std::ceil((left - ax.start) / ax.step - 1e-9)));
    double x_prev = left;
    double f_prev = root(c.at(left));
    for (; k < ax.size && ax.node(k) <= x; ++k) {
        const double xk = ax.node(k);
        const double fk = root(c.values[k]);
        tau += 0.5 * (xk - x_prev) * (fk + f_prev);
        x_prev = xk;
        f_prev = fk;
    }
    if (x > x_prev) tau += 0.5 * (x - x_prev) * (f_prev + root(c.at(x)));
    return tau;
}

/// Gaussian stand-in for the Dirac source: (30/sqrt(2 pi)) exp(-(30x)^2/2).
inline double smoothed_delta(double x) {
    const double s = 30.0 * x;
    return 30.0 / std::sqrt(2.0 * std::numbers::pi) * std::exp(-0.5 * s * s);
}

/// Carleman weight exp(-2 lambda (x + alpha t)).
inline double carleman_weight(double x, double t, const CarlemanParams& p) {
    return std::exp(-2.0 * p.lambda * (x + p.alpha * t));
}

}  // namespace carleman
