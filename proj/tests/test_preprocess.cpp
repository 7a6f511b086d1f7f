#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "carleman/preprocess.hpp"

using namespace carleman;

namespace {

TimeSeries sample(double t0, double t1, double dt, const auto& f) {
    TimeSeries s;
    const auto n = static_cast<std::size_t>(std::lround((t1 - t0) / dt)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        s.times.push_back(t);
        s.values.push_back(f(t));
    }
    return s;
}

double l2_distance(const TimeSeries& v, const auto& exact) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += std::pow(v.values[k] - exact(v.times[k]), 2);
    return std::sqrt(s * v.dt());
}

// Independent scan: strict sign change of neighbouring differences.
EnvelopeSide brute_force_side(const std::vector<double>& f) {
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
    std::vector<E> top;
    for (int pick = 0; pick < 3; ++pick) {
        std::size_t best = all.size();
        for (std::size_t m = 0; m < all.size(); ++m) {
            const bool taken = std::any_of(top.begin(), top.end(), [&](const E& e) { return e.k == all[m].k; });
            if (!taken && (best == all.size() || std::abs(all[m].v) > std::abs(all[best].v))) best = m;
        }
        top.push_back(all[best]);
    }
    std::sort(top.begin(), top.end(), [](const E& a, const E& b) { return a.k < b.k; });
    return top[1].max ? EnvelopeSide::Upper : EnvelopeSide::Lower;
}

TimeSeries from_values(std::vector<double> v, double dt = 1.0) {
    TimeSeries s;
    for (std::size_t k = 0; k < v.size(); ++k) s.times.push_back(static_cast<double>(k) * dt);
    s.values = std::move(v);
    return s;
}

CoefficientProfile ramp_profile(const UniformAxis& ax, const auto& f) {
    CoefficientProfile c{ax, std::vector<double>(ax.size)};
    for (std::size_t k = 0; k < ax.size; ++k) c.values[k] = f(ax.node(k));
    return c;
}

}  // namespace

TEST(Tikhonov, LinearFunction) {
    const TimeSeries g = sample(0.0, 1.0, 0.01, [](double t) { return t; });
    const TimeSeries v = tikhonov_derivative(g, 1e-6);
    for (double d : v.values) EXPECT_NEAR(d, 1.0, 1e-2);
}

TEST(Tikhonov, SineInterior) {
    const TimeSeries g = sample(0.0, 6.0, 0.02, [](double t) { return std::sin(t); });
    const TimeSeries v = tikhonov_derivative(g, 1e-6);
    for (std::size_t k = 0; k < v.size(); ++k)
        if (v.times[k] >= 0.6 && v.times[k] <= 5.4) EXPECT_NEAR(v.values[k], std::cos(v.times[k]), 5e-2);
}

TEST(Tikhonov, NoisySineMonteCarlo) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        TimeSeries g = sample(0.0, 6.0, 0.02, [](double t) { return std::sin(t); });
        for (double& x : g.values) x *= 1.0 + 0.05 * u(rng);
        total += l2_distance(tikhonov_derivative(g, 1e-4), [](double t) { return std::cos(t); });
    }
    EXPECT_LT(total / 10.0, 0.15);
}

TEST(Tikhonov, LinearInData) {
    const TimeSeries a = sample(0.0, 3.0, 0.02, [](double t) { return std::exp(-t) * t; });
    const TimeSeries b = sample(0.0, 3.0, 0.02, [](double t) { return std::cos(3.0 * t); });
    TimeSeries mix = a;
    for (std::size_t k = 0; k < mix.size(); ++k) mix.values[k] = 2.0 * a.values[k] - 0.5 * b.values[k];
    const TimeSeries va = tikhonov_derivative(a, 1e-4), vb = tikhonov_derivative(b, 1e-4), vm = tikhonov_derivative(mix, 1e-4);
    for (std::size_t k = 0; k < mix.size(); ++k) EXPECT_NEAR(vm.values[k], 2.0 * va.values[k] - 0.5 * vb.values[k], 1e-10);
}

TEST(Tikhonov, ConstantsHaveZeroDerivative) {
    for (double reg : {1e-8, 1e-4, 1.0}) {
        const TimeSeries v = tikhonov_derivative(sample(0.0, 2.0, 0.02, [](double) { return 0.5; }), reg);
        for (double d : v.values) EXPECT_EQ(d, 0.0);
    }
}

TEST(Tikhonov, Rejections) {
    const TimeSeries g = sample(0.0, 1.0, 0.1, [](double t) { return t; });
    EXPECT_THROW(tikhonov_derivative(g, 0.0), InputError);
    EXPECT_THROW(tikhonov_derivative(g, -1.0), InputError);
    TimeSeries bad = g;
    bad.times[3] += 0.05;
    EXPECT_THROW(tikhonov_derivative(bad, 1e-4), InputError);
    EXPECT_THROW(tikhonov_derivative(from_values({1.0, 2.0}), 1e-4), InputError);
}

TEST(Calibration, Factors) {
    EXPECT_DOUBLE_EQ(scale_calibration(from_values({534592.0, 534592.0, 534592.0}), Medium::Air).values[1], 1.0);
    EXPECT_DOUBLE_EQ(scale_calibration(from_values({265223.0, 265223.0, 265223.0}), Medium::Ground).values[2], 1.0);
    for (double v : scale_calibration(from_values({0.0, 0.0, 0.0}), Medium::Air).values) EXPECT_EQ(v, 0.0);
}

TEST(Calibration, LinearAndInvertible) {
    const TimeSeries f = from_values({3.0, -7.5, 1e6, 42.0});
    const TimeSeries s = scale_calibration(f, Medium::Ground);
    for (std::size_t k = 0; k < f.size(); ++k) {
        EXPECT_NEAR(s.values[k] * kCalibrationGround, f.values[k], 1e-9 * std::abs(f.values[k]));
        EXPECT_EQ(s.times[k], f.times[k]);
    }
}

TEST(Envelope, SelectionExamples) {
    // extrema +1, -3, +2
    EXPECT_EQ(select_envelope(from_values({0.0, 1.0, 0.0, -3.0, 0.0, 2.0, 0.0})), EnvelopeSide::Lower);
    EXPECT_EQ(select_envelope(from_values({0.0, -1.0, 0.0, 3.0, 0.0, -2.0, 0.0})), EnvelopeSide::Upper);
}

TEST(Envelope, SelectionNeedsThreeExtrema) {
    EXPECT_THROW(select_envelope(from_values({0.0, 1.0, 0.0, -1.0, 0.0})), InputError);
    EXPECT_THROW(select_envelope(from_values({0.0, 1.0, 2.0, 3.0})), InputError);
}

TEST(Envelope, PlateauCountsOnce) {
    const std::vector<Extremum> e = local_extrema({0.0, 2.0, 2.0, 2.0, 0.0});
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].index, 2u);
    EXPECT_TRUE(e[0].is_max);
}

TEST(Envelope, DampedSineMatchesScan) {
    const TimeSeries f = sample(0.0, 3.0, 0.01, [](double t) { return std::sin(2.0 * std::numbers::pi * t) * std::exp(-t); });
    EXPECT_EQ(select_envelope(f), brute_force_side(f.values));
}

TEST(Envelope, RandomDampedOscillationsMatchScan) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> freq(0.5, 4.0), damp(0.1, 2.0), phase(0.0, 2.0 * std::numbers::pi),
        amp(-5.0, 5.0), shift(0.0, 1.5);
    int lower = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double w = freq(rng), d = damp(rng), p = phase(rng), a = amp(rng), s = shift(rng);
        const TimeSeries f = sample(0.0, 4.0, 0.005, [&](double t) {
            return a * std::sin(2.0 * std::numbers::pi * w * t + p) * std::exp(-d * std::abs(t - s));
        });
        const EnvelopeSide side = select_envelope(f);
        EXPECT_EQ(side, brute_force_side(f.values)) << "trial " << trial;
        lower += side == EnvelopeSide::Lower;
    }
    EXPECT_GT(lower, 10);
    EXPECT_LT(lower, 90);
}

TEST(Envelope, ScalingInvarianceAndNegationFlip) {
    const TimeSeries f = sample(0.0, 3.0, 0.01, [](double t) { return std::sin(5.0 * t + 0.3) * std::exp(-0.7 * t); });
    const EnvelopeSide side = select_envelope(f);
    TimeSeries scaled = f, negated = f;
    for (double& v : scaled.values) v *= 37.5;
    for (double& v : negated.values) v = -v;
    EXPECT_EQ(select_envelope(scaled), side);
    EXPECT_NE(select_envelope(negated), side);
}

TEST(Envelope, BoundsTheSignal) {
    const TimeSeries f = sample(0.0, 4.0, 0.01, [](double t) { return std::cos(7.0 * t) * std::exp(-0.5 * t) + 0.1 * t; });
    const std::vector<double> up = envelope(f.values, EnvelopeSide::Upper);
    const std::vector<double> lo = envelope(f.values, EnvelopeSide::Lower);
    for (std::size_t k = 0; k < f.size(); ++k) {
        EXPECT_GE(up[k], f.values[k]);
        EXPECT_LE(lo[k], f.values[k]);
    }
}

TEST(Envelope, MonotoneSignalIsItsOwnEnvelope) {
    const TimeSeries f = sample(0.0, 2.0, 0.01, [](double t) { return t * t; });
    EXPECT_EQ(envelope(f.values, EnvelopeSide::Upper), f.values);
    EXPECT_EQ(envelope(f.values, EnvelopeSide::Lower), f.values);
    const TimeSeries tr = envelope_truncate(f, EnvelopeSide::Upper, 0.5);
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(tr.values[k], f.times[k] >= 1.5 - 1e-12 ? f.values[k] : 0.0);
    EXPECT_THROW(envelope(std::vector<double>(5, 1.0), EnvelopeSide::Upper), InputError);
}

TEST(Envelope, TruncationSupportAroundPulse) {
    const TimeSeries f = sample(0.0, 4.0, 0.01, [](double t) {
        return -std::exp(-std::pow((t - 2.0) / 0.05, 2)) + 0.01 * std::sin(40.0 * t);
    });
    const TimeSeries tr = envelope_truncate(f, EnvelopeSide::Lower, 0.5);
    double lo = 1e9, hi = -1e9;
    for (std::size_t k = 0; k < tr.size(); ++k)
        if (tr.values[k] != 0.0) {
            lo = std::min(lo, tr.times[k]);
            hi = std::max(hi, tr.times[k]);
        }
    EXPECT_GE(lo, 2.0 - 0.5 - 0.011);
    EXPECT_LE(hi, 2.0 + 0.5 + 0.011);
    EXPECT_THROW(envelope_truncate(f, EnvelopeSide::Lower, 0.0), InputError);
}

TEST(RelativeDielectric, MetalBoxRow) {
    const UniformAxis ax{0.0, 0.01, 301};
    // background midpoint 4, target peaks at ratio 4.00 inside D
    const CoefficientProfile c = ramp_profile(ax, [](double x) { return x > 0.9 && x < 1.1 ? 16.0 : 4.0; });
    const RelativeDielectric r = relative_dielectric(c, {{3.0, 5.0}, {0.5, 1.5}, Medium::Air});
    EXPECT_TRUE(r.raised);
    EXPECT_DOUBLE_EQ(r.c_comp.lo, 12.0);
    EXPECT_DOUBLE_EQ(r.c_comp.hi, 20.0);
    EXPECT_EQ(r.c_rel.at(2.0), 1.0);
    EXPECT_DOUBLE_EQ(r.c_rel.at(1.0), 4.0);
}

TEST(RelativeDielectric, UnitRatio) {
    const UniformAxis ax{0.0, 0.01, 301};
    const CoefficientProfile c = ramp_profile(ax, [](double) { return 4.0; });
    const RelativeDielectric r = relative_dielectric(c, {{3.0, 5.0}, {0.5, 1.5}, Medium::Air});
    for (double v : r.c_rel.values) EXPECT_DOUBLE_EQ(v, 1.0);
    EXPECT_DOUBLE_EQ(r.c_comp.lo, 3.0);
    EXPECT_DOUBLE_EQ(r.c_comp.hi, 5.0);
}

TEST(RelativeDielectric, LoweredTarget) {
    const UniformAxis ax{0.0, 0.01, 301};
    const CoefficientProfile c = ramp_profile(ax, [](double x) { return x > 0.9 && x < 1.1 ? 0.59 * 4.0 : 4.0; });
    const RelativeDielectric r = relative_dielectric(c, {{3.0, 5.0}, {0.5, 1.5}, Medium::Ground});
    EXPECT_FALSE(r.raised);
    EXPECT_NEAR(r.c_comp.lo, 1.77, 1e-12);
    EXPECT_NEAR(r.c_comp.hi, 2.95, 1e-12);
    EXPECT_NEAR(r.c_rel.at(0.7), 0.59, 1e-12);  // min ratio held on D
    EXPECT_EQ(r.c_rel.at(0.2), 1.0);
}

TEST(RelativeDielectric, ScalarBackgroundIsExact) {
    const UniformAxis ax{0.0, 0.01, 301};
    const CoefficientProfile c = ramp_profile(ax, [](double x) { return 2.0 + std::sin(x); });
    const RelativeDielectric r = relative_dielectric(c, {Interval::point(2.0), {0.0, 3.0}, Medium::Air});
    ASSERT_TRUE(r.c_comp.is_point());
    EXPECT_EQ(r.c_comp.lo, 2.0 * (c.max() / 2.0));
}

TEST(RelativeDielectric, EmptyRegionRejected) {
    const CoefficientProfile c = ramp_profile({0.0, 0.01, 301}, [](double) { return 1.0; });
    EXPECT_THROW(relative_dielectric(c, {Interval::point(1.0), {5.0, 6.0}, Medium::Air}), InputError);
    EXPECT_THROW(relative_dielectric(c, {Interval::point(0.0), {0.0, 1.0}, Medium::Air}), InputError);
}
