#pragma once

// Data conditioning ahead of the inversion: regularized differentiation of
// noisy g0, and the operators that turn a raw radar trace into g0.

#include <algorithm>
#include <functional>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carleman/error.hpp"
#include "carleman/model.hpp"

namespace carleman {

/// Uniformly sampled real signal.
struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;

    void validate() const {
        detail::require(times.size() == values.size(), "time series: times and values differ in length");
        detail::require(times.size() >= 3, "time series: need at least 3 samples");
        const double step = times[1] - times[0];
        detail::require(step > 0.0, "time series: times must increase");
        for (std::size_t k = 1; k < times.size(); ++k)
            detail::require(std::abs(times[k] - times[k - 1] - step) <= 1e-6 * step,
                            "time series: samples must be uniformly spaced");
    }

    double dt() const { return times[1] - times[0]; }
    std::size_t size() const { return values.size(); }
};

/// Regularized derivative of g: the minimizer v of
///   ||K v - (g - g(0))||^2 + reg (||v||^2 + ||v'||^2),
/// K being cumulative trapezoid integration, all norms discrete L2 on the
/// sample grid. Solved densely through the normal equations.
inline TimeSeries tikhonov_derivative(const TimeSeries& g, double reg) {
    g.validate();
    detail::require(reg > 0.0, "tikhonov_derivative: regularization weight must be positive");
    const auto n = static_cast<Eigen::Index>(g.size());
    const double h = g.dt();

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        K(k, 0) = 0.5 * h;
        for (Eigen::Index m = 1; m < k; ++m) K(k, m) = h;
        K(k, k) = 0.5 * h;
    }
    // trapezoid quadrature weights for the L2 norms
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
    w(0) = w(n - 1) = 0.5 * h;

    Eigen::VectorXd rhs(n);
    for (Eigen::Index k = 0; k < n; ++k) rhs(k) = g.values[static_cast<std::size_t>(k)] - g.values[0];

    Eigen::MatrixXd normal = K.transpose() * w.asDiagonal() * K;
    normal.diagonal() += reg * w;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        // reg * (v_{k+1} - v_k)^2 / h
        const double s = reg / h;
        normal(k, k) += s;
        normal(k + 1, k + 1) += s;
        normal(k, k + 1) -= s;
        normal(k + 1, k) -= s;
    }
    const Eigen::VectorXd b = K.transpose() * w.cwiseProduct(rhs);
    const Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) throw SolverError("tikhonov_derivative: normal matrix not positive definite");
    const Eigen::VectorXd v = llt.solve(b);
    return {g.times, std::vector<double>(v.data(), v.data() + n)};
}

enum class Medium { Air, Ground };

inline constexpr double kCalibrationAir = 534592.0;
inline constexpr double kCalibrationGround = 265223.0;

inline double calibration_factor(Medium m) {
    return m == Medium::Air ? kCalibrationAir : kCalibrationGround;
}

/// f_scale = f_raw / mu for the medium's calibration factor mu.
inline TimeSeries scale_calibration(TimeSeries f, Medium medium) {
    const double mu = calibration_factor(medium);
    for (double& v : f.values) v /= mu;
    return f;
}

enum class EnvelopeSide { Upper, Lower };

inline const char* to_string(EnvelopeSide s) { return s == EnvelopeSide::Upper ? "upper" : "lower"; }

struct Extremum {
    std::size_t index;
    double value;
    bool is_max;
};

/// Interior local extrema: points where the sign of the first difference
/// changes. A flat run between a rise and a fall (or fall and rise) counts as
/// one extremum located at the run's middle sample.
inline std::vector<Extremum> local_extrema(const std::vector<double>& f) {
    std::vector<Extremum> out;
    const std::size_t n = f.size();
    if (n < 3) return out;
    int prev_sign = 0;
    std::size_t run_start = 0;  // first sample of the current flat run
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double d = f[k + 1] - f[k];
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0) continue;
        if (prev_sign != 0 && s != prev_sign) {
            const std::size_t mid = (run_start + k) / 2;
            out.push_back({mid, f[mid], prev_sign > 0});
        }
        prev_sign = s;
        run_start = k + 1;
    }
    return out;
}

/// Chooses the envelope side from the three largest-magnitude extrema: lower
/// when the middle one (in time) is a minimum, upper otherwise.
inline EnvelopeSide select_envelope(const TimeSeries& f) {
    f.validate();
    std::vector<Extremum> ext = local_extrema(f.values);
    if (ext.size() < 3)
        throw InputError("select_envelope: found " + std::to_string(ext.size()) +
                         " local extrema, need at least 3; check that the trace contains the "
                         "target response and is not truncated or over-smoothed");
    std::stable_sort(ext.begin(), ext.end(),
                     [](const Extremum& a, const Extremum& b) { return std::abs(a.value) > std::abs(b.value); });
    ext.resize(3);
    std::sort(ext.begin(), ext.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });
    return ext[1].is_max ? EnvelopeSide::Upper : EnvelopeSide::Lower;
}

/// Envelope on the chosen side: linear interpolation through that side's
/// local extrema, held constant past the first and last one, and finally
/// limited by f itself so that lower <= f <= upper holds sample by sample.
/// Without extrema on that side the envelope is f.
inline std::vector<double> envelope(const std::vector<double>& f, EnvelopeSide side) {
    std::vector<std::size_t> knots;
    for (const Extremum& e : local_extrema(f))
        if (e.is_max == (side == EnvelopeSide::Upper)) knots.push_back(e.index);
    if (knots.empty()) {
        // no extremum on this side: a monotone stretch is its own envelope
        if (std::adjacent_find(f.begin(), f.end(), std::not_equal_to<>()) == f.end())
            throw InputError("envelope: signal is constant, no extremum to build an envelope from");
        return f;
    }
    std::vector<double> env(f.size());
    std::size_t seg = 0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        double e;
        if (k <= knots.front()) {
            e = f[knots.front()];
        } else if (k >= knots.back()) {
            e = f[knots.back()];
        } else {
            while (knots[seg + 1] < k) ++seg;
            const double w = static_cast<double>(k - knots[seg]) / static_cast<double>(knots[seg + 1] - knots[seg]);
            e = (1.0 - w) * f[knots[seg]] + w * f[knots[seg + 1]];
        }
        env[k] = side == EnvelopeSide::Upper ? std::max(e, f[k]) : std::min(e, f[k]);
    }
    return env;
}

/// Envelope of f, zeroed outside [t* - window, t* + window] where t* is the
/// envelope's global extremum on the chosen side.
inline TimeSeries envelope_truncate(const TimeSeries& f, EnvelopeSide side, double window = 0.5) {
    f.validate();
    detail::require(window > 0.0, "envelope_truncate: window must be positive");
    std::vector<double> env = envelope(f.values, side);
    const auto it = side == EnvelopeSide::Upper ? std::max_element(env.begin(), env.end())
                                                : std::min_element(env.begin(), env.end());
    const double center = f.times[static_cast<std::size_t>(it - env.begin())];
    for (std::size_t k = 0; k < env.size(); ++k)
        if (std::abs(f.times[k] - center) > window + 1e-12) env[k] = 0.0;
    return {f.times, std::move(env)};
}

/// Closed interval [lo, hi]; a scalar is the degenerate interval.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    static Interval point(double v) { return {v, v}; }
    double mid() const { return 0.5 * (lo + hi); }
    bool is_point() const { return lo == hi; }
    bool contains(double x) const { return x >= lo && x <= hi; }
    Interval operator*(double s) const { return s >= 0 ? Interval{lo * s, hi * s} : Interval{hi * s, lo * s}; }
};

/// Background medium and target location for the relative-contrast report.
/// The ratio c_target / c_bckgr uses the midpoint of `background`.
struct TargetContext {
    Interval background = Interval::point(1.0);
    Interval region{0.0, std::numeric_limits<double>::infinity()};
    Medium medium = Medium::Air;
};

struct RelativeDielectric {
    CoefficientProfile c_rel;
    Interval c_comp;
    bool raised = true;  // max ratio > 1 branch
};

/// c_rel(x): ratio on D when its maximum exceeds 1, otherwise the minimum
/// ratio held constant on D; 1 outside D. c_comp = background times the
/// extremal c_rel, by endpoint multiplication for an interval background.
inline RelativeDielectric relative_dielectric(const CoefficientProfile& c_target, const TargetContext& ctx) {
    detail::require(ctx.background.lo > 0.0 && ctx.background.lo <= ctx.background.hi,
                    "relative_dielectric: background must be a positive interval");
    const double ref = ctx.background.mid();
    double max_ratio = -std::numeric_limits<double>::infinity();
    double min_ratio = std::numeric_limits<double>::infinity();
    std::size_t inside = 0;
    for (std::size_t k = 0; k < c_target.values.size(); ++k) {
        if (!ctx.region.contains(c_target.axis.node(k))) continue;
        const double r = c_target.values[k] / ref;
        max_ratio = std::max(max_ratio, r);
        min_ratio = std::min(min_ratio, r);
        ++inside;
    }
    detail::require(inside > 0, "relative_dielectric: target region contains no grid nodes");

    RelativeDielectric out{c_target, {}, max_ratio > 1.0};
    for (std::size_t k = 0; k < c_target.values.size(); ++k) {
        double& v = out.c_rel.values[k];
        if (!ctx.region.contains(c_target.axis.node(k)))
            v = 1.0;
        else
            v = out.raised ? c_target.values[k] / ref : min_ratio;
    }
    out.c_comp = ctx.background * (out.raised ? max_ratio : min_ratio);
    return out;
}

}  // namespace carleman
