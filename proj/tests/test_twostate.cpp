#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "strongnoise/twostate.hpp"

using namespace strongnoise;

TEST(TwoStateEmStep, FixedAtLongTermMeanWithoutNoise) {
    const TwoStateParams params{1.0, 0.3, 400.0};
    EXPECT_EQ(em_step(params, 0.3, 1e-3, 0.0), 0.3);
}

TEST(TwoStateEmStep, BoundaryIsAbsorbingWithoutMeanReversion) {
    const TwoStateParams params{0.0, 0.3, 400.0};
    for (double dW : {-1.0, -0.01, 0.0, 0.2, 3.0}) {
        EXPECT_EQ(em_step(params, 0.0, 1e-3, dW), 0.0);
        EXPECT_EQ(em_step(params, 1.0, 1e-3, dW), 1.0);
    }
}

TEST(TwoStateEmStep, ClampsAreCounted) {
    const TwoStateParams params{1.0, 0.3, 1e4};
    StepStats stats;
    const double q = em_step(params, 0.5, 1e-3, 0.5, &stats);
    EXPECT_EQ(q, 1.0);
    EXPECT_EQ(stats.clamps, 1u);
    EXPECT_EQ(stats.steps, 1u);
}

TEST(TwoStateSimulate, ZeroHorizonIsSinglePoint) {
    const auto path = simulate({1.0, 0.3, 10.0}, 0.42, 1e-3, 0.0, 1);
    ASSERT_EQ(path.size(), 1u);
    EXPECT_EQ(path.values[0], 0.42);
    EXPECT_EQ(path.times[0], 0.0);
}

TEST(TwoStateSimulate, NoiselessStartAtMeanIsConstant) {
    const auto path = simulate({2.0, 0.3, 0.0}, 0.3, 1e-3, 5.0, 1);
    EXPECT_EQ(path.size(), 5001u);
    for (double v : path.values) EXPECT_EQ(v, 0.3);
}

TEST(TwoStateSimulate, NoiselessPathRelaxesExponentially) {
    // Global Euler error is O(dt); halving dt must roughly halve it.
    const TwoStateParams params{1.5, 0.3, 0.0};
    double previous = 0.0;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        const auto path = simulate(params, 0.9, dt, 3.0, 1);
        double worst = 0.0;
        for (std::size_t i = 0; i < path.size(); ++i) {
            const double exact = params.p + (0.9 - params.p) * std::exp(-params.lambda * path.times[i]);
            worst = std::max(worst, std::abs(path.values[i] - exact));
        }
        EXPECT_LE(worst, 0.5 * dt);
        if (previous > 0.0) {
            EXPECT_NEAR(worst / previous, 0.5, 0.05);
        }
        previous = worst;
    }
}

TEST(TwoStateSimulate, SamplesStayInUnitInterval) {
    StepStats stats;
    SimulateOptions options;
    options.apply_dt_rule = false;
    const auto path = simulate({1.0, 0.3, 2000.0}, 0.5, 1e-3, 20.0, 3, options, &stats);
    path.validate(0.0, 1.0);
    EXPECT_GT(stats.clamps, 0u);  // this step size is deliberately too coarse
    EXPECT_EQ(stats.steps, 20000u);
}

TEST(TwoStateSimulate, StepRuleCapsDt) {
    const auto path = simulate({1.0, 0.3, 100.0}, 0.5, 1.0, 1.0, 4);
    EXPECT_EQ(path.size(), 10001u);  // dt = 0.01 / 100
}

TEST(TwoStateSimulate, StepBudgetIsEnforced) {
    SimulateOptions options;
    options.max_steps = 10;
    EXPECT_THROW(simulate({1.0, 0.3, 1.0}, 0.5, 1e-3, 1.0, 5, options), StepBudgetExceeded);
}

TEST(TwoStateSimulate, InvalidInputsThrow) {
    EXPECT_THROW(simulate({1.0, 0.3, 1.0}, 1.5, 1e-3, 1.0, 5), InvalidArgument);
    EXPECT_THROW(simulate({1.0, 1.3, 1.0}, 0.5, 1e-3, 1.0, 5), InvalidArgument);
    EXPECT_THROW(simulate({-1.0, 0.3, 1.0}, 0.5, 1e-3, 1.0, 5), InvalidArgument);
}

TEST(TwoStateSimulate, SameSeedReproducesPath) {
    const auto a = simulate({1.0, 0.3, 50.0}, 0.5, 1e-4, 1.0, 99);
    const auto b = simulate({1.0, 0.3, 50.0}, 0.5, 1e-4, 1.0, 99);
    EXPECT_EQ(a.values, b.values);
    const auto c = simulate({1.0, 0.3, 50.0}, 0.5, 1e-4, 1.0, 100);
    EXPECT_NE(a.values, c.values);
}

TEST(TwoStateSimulate, DriftFreeProcessIsAMartingale) {
    // lambda = 0: E[q_T] = q0. Check within 3 standard errors.
    const TwoStateParams params{0.0, 0.5, 4.0};
    const int runs = 2000;
    std::vector<double> finals;
    finals.reserve(runs);
    for (int r = 0; r < runs; ++r) {
        SimulateOptions options;
        options.trajectory = static_cast<std::uint64_t>(r);
        finals.push_back(simulate(params, 0.35, 1e-3, 1.0, 2024, options).values.back());
    }
    const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / runs;
    double var = 0.0;
    for (double v : finals) var += (v - mean) * (v - mean);
    var /= (runs - 1);
    EXPECT_LT(std::abs(mean - 0.35), 3.0 * std::sqrt(var / runs));
}

TEST(TwoStateSimulate, LongRunOccupationOfUpperStateApproachesP) {
    // Stationary occupation of the limiting chain is p (detailed balance).
    // 16 independent T = 200 runs pooled: the standard error of the pooled
    // fraction is about 0.012, so +-0.03 is a 2.5 sigma band.
    const TwoStateParams params{1.0, 0.3, 400.0};
    double upper = 0.0, total = 0.0;
    for (std::uint64_t r = 0; r < 16; ++r) {
        SimulateOptions options;
        options.trajectory = r;
        options.stride = 10;
        const auto path = simulate(params, 0.3, 2.5e-5, 200.0, 7, options);
        for (double v : path.values) {
            upper += v > 0.5 ? 1.0 : 0.0;
            total += 1.0;
        }
    }
    EXPECT_NEAR(upper / total, 0.3, 0.03);
}
