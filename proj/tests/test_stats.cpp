#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "strongnoise/spike_limit.hpp"
#include "strongnoise/stats.hpp"

using namespace strongnoise;

namespace {

Path uniform_path(double T, std::size_t n, const std::function<double(double)>& x) {
    Path p;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(n);
        p.times.push_back(t);
        p.values.push_back(x(t));
    }
    return p;
}

// Piecewise-constant rendering of a chain on a fine grid.
Path render(const JumpChain& chain, double dt) {
    Path p;
    for (double t = 0.0; t <= chain.horizon; t += dt) {
        p.times.push_back(t);
        p.values.push_back(chain.state_at(t));
    }
    return p;
}

}  // namespace

TEST(Occupation, ConstantOneGivesDuration) {
    const auto path = uniform_path(3.5, 70, [](double t) { return std::sin(t) * std::sin(t); });
    EXPECT_NEAR(occupation_functional(path, [](double, double) { return 1.0; }), 3.5, 1e-14);
}

TEST(Occupation, IndicatorOnZeroPath) {
    const auto path = uniform_path(2.0, 20, [](double) { return 0.0; });
    EXPECT_EQ(occupation_functional(path, [](double, double x) { return x > 0.5 ? 1.0 : 0.0; }), 0.0);
}

TEST(Occupation, LinearAndAdditive) {
    const auto path = uniform_path(4.0, 400, [](double t) { return 0.5 + 0.4 * std::cos(3 * t); });
    PathFunctional f = [](double t, double x) { return t * x; };
    PathFunctional g = [](double t, double x) { return std::exp(-t) + x * x; };
    const double lhs = occupation_functional(path, [&](double t, double x) { return 2 * f(t, x) - g(t, x); });
    EXPECT_NEAR(lhs, 2 * occupation_functional(path, f) - occupation_functional(path, g), 1e-12);
    Path a, b;
    a.times.assign(path.times.begin(), path.times.begin() + 151);
    a.values.assign(path.values.begin(), path.values.begin() + 151);
    b.times.assign(path.times.begin() + 150, path.times.end());
    b.values.assign(path.values.begin() + 150, path.values.end());
    EXPECT_NEAR(occupation_functional(path, f), occupation_functional(a, f) + occupation_functional(b, f), 1e-12);
}

TEST(Occupation, ChainVersionMatchesFineRendering) {
    const auto chain = sample_Q(1.0, 0.3, 0.5, 20.0, 3);
    PathFunctional f = [](double t, double x) { return std::exp(-0.1 * t) * x; };
    const double exact = occupation_functional(chain, f);
    EXPECT_NEAR(occupation_functional(render(chain, 1e-4), f), exact, 1e-3);
}

TEST(Occupation, StreamingAccumulatorMatchesBatch) {
    const auto path = uniform_path(2.0, 100, [](double t) { return t / 2; });
    PathFunctional f = [](double t, double x) { return t + x * x; };
    OccupationAccumulator acc(f);
    for (std::size_t i = 0; i < path.size(); ++i) acc(path.times[i], path.values[i]);
    EXPECT_DOUBLE_EQ(acc.value(), occupation_functional(path, f));
}

TEST(Smooth, ConstantPathUnchanged) {
    const auto path = uniform_path(1.0, 100, [](double) { return 0.37; });
    for (auto mode : {SmoothingMode::MovingAverage, SmoothingMode::Block}) {
        const auto s = smooth(path, 0.1, mode);
        for (double v : s.values) EXPECT_NEAR(v, 0.37, 1e-14);
    }
}

TEST(Smooth, VanishingWindowIsIdentity) {
    const auto path = uniform_path(1.0, 100, [](double t) { return t * t; });
    EXPECT_EQ(smooth(path, 0.0).values, path.values);
    const auto s = smooth(path, 1e-6);
    // The window is one-sided at the ends, where the bias is O(window).
    for (std::size_t i = 0; i < path.size(); ++i) EXPECT_NEAR(s.values[i], path.values[i], 1e-6);
    // Interior: the interpolant kink at a node contributes slope jump * window / 8.
    for (std::size_t i = 1; i + 1 < path.size(); ++i) EXPECT_NEAR(s.values[i], path.values[i], 1e-8);
}

TEST(Smooth, CommutesWithShiftAndKeepsEnvelope) {
    CounterRng rng(4);
    const auto path = uniform_path(1.0, 500, [&](double) { return uniform_open(rng); });
    Path shifted = path;
    for (double& v : shifted.values) v += 0.25;
    const auto a = smooth(path, 0.05), b = smooth(shifted, 0.05);
    const double lo = *std::min_element(path.values.begin(), path.values.end());
    const double hi = *std::max_element(path.values.begin(), path.values.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(b.values[i], a.values[i] + 0.25, 1e-12);
        EXPECT_GE(a.values[i], lo - 1e-15);
        EXPECT_LE(a.values[i], hi + 1e-15);
    }
}

TEST(Smooth, MovingAverageOfLinearPathIsExactInInterior) {
    const auto path = uniform_path(1.0, 1000, [](double t) { return 2 * t; });
    const auto s = smooth(path, 0.1);
    for (std::size_t i = 100; i < 900; ++i) EXPECT_NEAR(s.values[i], path.values[i], 1e-12);
}

TEST(Smooth, BlockModeIsPiecewiseConstant) {
    const auto path = uniform_path(1.0, 1000, [](double t) { return t; });
    const auto s = smooth(path, 0.25, SmoothingMode::Block);
    EXPECT_NEAR(s.values[10], 0.125, 1e-12);
    EXPECT_NEAR(s.values[240], 0.125, 1e-12);
    EXPECT_NEAR(s.values[260], 0.375, 1e-12);
}

TEST(JumpRates, ConstantPathWithheld) {
    EXPECT_FALSE(estimate_jump_rates(uniform_path(5.0, 50, [](double) { return 0.1; })).has_value());
}

TEST(JumpRates, ExactChainRecoversRates) {
    const auto chain = sample_Q(1.0, 0.3, 0.0, 40000.0, 5);
    const auto est = estimate_jump_rates(chain);
    ASSERT_TRUE(est.has_value());
    EXPECT_GT(est->n01 + est->n10, 10000u);
    EXPECT_NEAR(est->w01_hat / 0.3, 1.0, 0.02);
    EXPECT_NEAR(est->w10_hat / 0.7, 1.0, 0.02);
    EXPECT_NEAR(est->w01_hat, 0.3, est->half_width01);
}

TEST(JumpRates, RenderedChainMatchesChainEstimate) {
    const auto chain = sample_Q(1.0, 0.3, 0.0, 500.0, 6);
    const auto a = estimate_jump_rates(chain), b = estimate_jump_rates(render(chain, 1e-3));
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->n01, b->n01);
    EXPECT_EQ(a->n10, b->n10);
    EXPECT_NEAR(a->w01_hat, b->w01_hat, 1e-3);
}

TEST(JumpRates, HysteresisIgnoresTallSpikes) {
    Path p = uniform_path(10.0, 1000, [](double t) { return std::abs(t - 5.0) < 0.02 ? 0.75 : 0.0; });
    EXPECT_FALSE(estimate_jump_rates(p).has_value());
}

TEST(CountSpikes, ZeroPathHasNoSpikes) {
    const auto c = count_spikes(uniform_path(1.0, 100, [](double) { return 0.0; }), 0.1);
    EXPECT_EQ(c.up + c.down, 0u);
    EXPECT_NEAR(c.time0, 1.0, 1e-12);
}

TEST(CountSpikes, CountsExcursionsAboveLevel) {
    // Two excursions of height 0.4 and 0.05 from 0, then a jump to 1 and a dip to 0.7.
    Path p;
    const double xs[] = {0, 0.2, 0.4, 0.1, 0, 0.05, 0, 0.5, 1, 1, 0.7, 1, 1};
    for (std::size_t i = 0; i < std::size(xs); ++i) {
        p.times.push_back(static_cast<double>(i));
        p.values.push_back(xs[i]);
    }
    const auto c = count_spikes(p, 0.1);
    EXPECT_EQ(c.up, 1u);
    EXPECT_EQ(c.down, 1u);
    EXPECT_EQ(count_spikes(p, 0.01).up, 2u);
}

TEST(CountSpikes, ExactSpikeSetCounts) {
    const auto chain = sample_Q(1.0, 0.3, 0.0, 10.0, 7);
    const auto spikes = sample_spikes(1.0, 0.3, chain, 1e-2, 8);
    std::size_t up = 0, down = 0;
    for (const auto& e : spikes.events)
        if (e.m >= 0.3) (e.state == 0 ? up : down)++;
    const auto c = count_spikes(spikes, chain, 0.3);
    EXPECT_EQ(c.up, up);
    EXPECT_EQ(c.down, down);
}

TEST(Ks, SingleSampleAtMedian) {
    EXPECT_DOUBLE_EQ(ks_statistic({0.0}, [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }), 0.5);
}

TEST(Ks, PointMassAgainstStep) {
    EXPECT_EQ(ks_statistic({2.0, 2.0, 2.0}, [](double x) { return x >= 2.0 ? 1.0 : 0.0; }), 0.0);
}

TEST(Ks, EmptyThrows) {
    EXPECT_THROW(ks_statistic({}, [](double) { return 0.0; }), InvalidArgument);
}

TEST(Ks, SamplesFromCdfPassAtNominalLevel) {
    // At 1.63/sqrt(N) each run fails with probability about 1%.
    int pass = 0;
    const int reps = 200, n = 10000;
    for (int r = 0; r < reps; ++r) {
        CounterRng rng = make_stream(9, r);
        std::vector<double> xs(n);
        for (double& x : xs) x = uniform_open(rng);
        pass += ks_statistic(xs, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 1.63 / std::sqrt(n);
    }
    EXPECT_GE(pass, 190);
}
