#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "strongnoise/spike_limit.hpp"
#include "strongnoise/stats.hpp"

using namespace strongnoise;

namespace {
constexpr double kLambda = 1.0, kP = 0.3;

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
}  // namespace

TEST(SampleQ, StartsInUpperStateWhenXIsOne) {
    for (std::uint64_t r = 0; r < 50; ++r) EXPECT_EQ(sample_Q(kLambda, kP, 1.0, 1.0, 3, r).initial_state, 1);
    for (std::uint64_t r = 0; r < 50; ++r) EXPECT_EQ(sample_Q(kLambda, kP, 0.0, 1.0, 3, r).initial_state, 0);
}

TEST(SampleQ, ChainIsValidAndAlternates) {
    const auto chain = sample_Q(kLambda, kP, 0.4, 100.0, 4);
    EXPECT_NO_THROW(chain.validate());
    EXPECT_GT(chain.jump_times.size(), 10u);
}

TEST(SampleQ, HoldingMeansMatchRates) {
    const auto chain = sample_Q(kLambda, kP, 0.0, 25000.0, 5);
    const auto h0 = chain.holding_times(0), h1 = chain.holding_times(1);
    ASSERT_GT(h0.size(), 4000u);
    EXPECT_NEAR(mean(h0), 1.0 / (kLambda * kP), 0.05 / (kLambda * kP));
    EXPECT_NEAR(mean(h1), 1.0 / (kLambda * (1.0 - kP)), 0.05 / (kLambda * (1.0 - kP)));
}

TEST(SampleQ, LongRunOccupationOfUpperState) {
    const auto chain = sample_Q(kLambda, kP, 0.5, 20000.0, 6);
    EXPECT_NEAR(chain.time_in_state(1) / chain.horizon, kP, 0.02);
}

TEST(FirstSpike, DegenerateAtEndpoints) {
    CounterRng rng(1);
    const auto s0 = sample_first_spike(0.0, rng);
    EXPECT_EQ(s0.lo, 0.0);
    EXPECT_EQ(s0.hi, 0.0);
    EXPECT_EQ(s0.state(), 0);
    const auto s1 = sample_first_spike(1.0, rng);
    EXPECT_EQ(s1.lo, 1.0);
    EXPECT_EQ(s1.state(), 1);
}

TEST(FirstSpike, CaseDensityIntegratesToProbability) {
    for (double x : {0.1, 0.4, 0.77}) {
        const double mass = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [x](double y) { return (1.0 - x) / ((1.0 - y) * (1.0 - y)); }, 0.0, x);
        EXPECT_NEAR(mass, x, 1e-12);
        const double other = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [x](double y) { return x / (y * y); }, x, 1.0);
        EXPECT_NEAR(other, 1.0 - x, 1e-12);
    }
}

TEST(FirstSpike, SymmetricAtHalf) {
    CounterRng rng(2);
    const int n = 20000;
    std::vector<double> up, down;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_first_spike(0.5, rng);
        ASSERT_LE(s.lo, 0.5 + 1e-15);
        ASSERT_GE(s.hi, 0.5 - 1e-15);
        if (s.up_to_one) up.push_back(s.lo);
        else down.push_back(1.0 - s.hi);
    }
    EXPECT_NEAR(static_cast<double>(up.size()) / n, 0.5, 3.0 * std::sqrt(0.25 / n));
    // Mirror images: compare the two empirical laws through a common CDF.
    auto cdf = [](double y) { return y <= 0 ? 0.0 : y >= 0.5 ? 1.0 : y / (1.0 - y); };
    EXPECT_LT(ks_statistic(up, cdf), 1.63 / std::sqrt(up.size()));
    EXPECT_LT(ks_statistic(down, cdf), 1.63 / std::sqrt(down.size()));
}

TEST(SampleSpikes, NearlyEmptyWhenThresholdNearOne) {
    const auto chain = sample_Q(kLambda, kP, 0.0, 10.0, 7);
    EXPECT_EQ(sample_spikes(kLambda, kP, chain, 1.0 - 1e-12, 8).size(), 0u);
    EXPECT_THROW(sample_spikes(kLambda, kP, chain, 1.0, 8), InvalidArgument);
}

TEST(SampleSpikes, OrientationMatchesEpochState) {
    const auto chain = sample_Q(kLambda, kP, 0.0, 50.0, 9);
    const auto spikes = sample_spikes(kLambda, kP, chain, 1e-2, 10);
    spikes.validate();
    for (const auto& e : spikes.events) {
        EXPECT_EQ(e.state, chain.state_at(e.t));
        EXPECT_TRUE(e.lo() == 0.0 || e.hi() == 1.0);
    }
}

TEST(SampleSpikes, CountsMatchIntensity) {
    const auto chain = sample_Q(kLambda, kP, 0.0, 200.0, 11);
    const auto spikes = sample_spikes(kLambda, kP, chain, 1e-3, 12);
    for (double m : {0.1, 0.3, 0.5}) {
        const auto c = count_spikes(spikes, chain, m);
        const double e0 = kLambda * kP * c.time0 * (1.0 / m - 1.0);
        const double e1 = kLambda * (1.0 - kP) * c.time1 * (1.0 / m - 1.0);
        EXPECT_NEAR(c.up, e0, 3.0 * std::sqrt(e0)) << m;
        EXPECT_NEAR(c.down, e1, 3.0 * std::sqrt(e1)) << m;
    }
}

TEST(SampleSpikes, HalvingThresholdScalesExpectedCount) {
    const auto chain = sample_Q(kLambda, kP, 0.0, 400.0, 13);
    const double m = 0.2;
    double n_m = 0, n_half = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
        n_m += sample_spikes(kLambda, kP, chain, m, 14, r).size();
        n_half += sample_spikes(kLambda, kP, chain, m / 2, 15, r).size();
    }
    const double expected = (2.0 / m - 1.0) / (1.0 / m - 1.0);
    EXPECT_NEAR(n_half / n_m, expected, 0.03 * expected);
}

TEST(SampleSpikes, MaximaFollowTruncatedLaw) {
    const double m_min = 1e-3;
    const auto chain = sample_Q(kLambda, kP, 0.0, 30.0, 16);
    const auto spikes = sample_spikes(kLambda, kP, chain, m_min, 17);
    ASSERT_GT(spikes.size(), 5000u);
    std::vector<double> maxima;
    for (const auto& e : spikes.events) maxima.push_back(e.m);
    auto cdf = [m_min](double m) {
        if (m <= m_min) return 0.0;
        return std::min(1.0, 1.0 - (1.0 / m - 1.0) / (1.0 / m_min - 1.0));
    };
    EXPECT_LT(ks_statistic(maxima, cdf), 1.63 / std::sqrt(maxima.size()));
}

TEST(LimitProcess, InitialStateFollowsFirstSpike) {
    int ones = 0;
    const int n = 4000;
    for (int r = 0; r < n; ++r) {
        const auto s = sample_limit_process(kLambda, kP, 0.4, 1.0, 0.1, 18, r);
        EXPECT_EQ(s.chain.initial_state, s.first.state());
        ones += s.chain.initial_state;
    }
    EXPECT_NEAR(static_cast<double>(ones) / n, 0.4, 3.0 * std::sqrt(0.24 / n));
}

TEST(LimitGraph, ColumnsContainChainValueAndFullAtJumps) {
    const auto s = sample_limit_process(kLambda, kP, 0.3, 40.0, 1e-2, 19);
    const double delta = 1e-3;
    const auto g = limit_graph(s.chain, s.spikes, delta, &s.first);
    g.validate();
    const double width = delta * s.chain.horizon;
    for (const auto& c : g.columns) {
        const double a = c.t - 0.5 * width, b = c.t + 0.5 * width;
        const int q = s.chain.state_at(c.t);
        bool jump_inside = false;
        for (double tj : s.chain.jump_times) jump_inside |= (tj >= a && tj < b);
        if (jump_inside) {
            EXPECT_EQ(c.lo, 0.0);
            EXPECT_EQ(c.hi, 1.0);
        } else {
            EXPECT_TRUE(c.lo <= q && q <= c.hi);
        }
    }
}

TEST(LimitGraph, FromBrownianPathStaysNearLevelZero) {
    BrownianPath beta;
    beta.dt_eff = 1e-2;
    beta.values = {0.0, 0.05, 0.02, -0.03, 0.01, 0.04, -0.02};
    const auto mc = mixed_local_time_clock(beta, kLambda, kP, {0.1, ClockBoundary::Free});
    const auto g = limit_graph(beta, mc, 0.5 * mc.reached(), 0.1);
    // The clock advances while beta is within the band, so columns reach 0 up to eps.
    EXPECT_EQ(g.columns.front().lo, 0.0);
    for (const auto& c : g.columns) {
        EXPECT_LE(c.lo, 0.1);
        EXPECT_LE(c.hi, 0.05);
    }
}

TEST(LimitGraph, ChainFromBrownianGraphHasGeneratorRates) {
    // Consistency between the excursion construction and the generator.
    const auto beta = sample_brownian(0.0, 1e-4, 1500.0, 20);
    const auto mc = mixed_local_time_clock(beta, kLambda, kP, {1e-2, ClockBoundary::Reflected});
    const double H = mc.reached() * 0.999;
    const auto g = limit_graph(beta, mc, H, 1e-6);
    const auto chain = chain_from_graph(g, 1e-2);
    const auto est = estimate_jump_rates(chain);
    ASSERT_TRUE(est.has_value());
    EXPECT_NEAR(est->w01_hat, kLambda * kP, est->half_width01);
    EXPECT_NEAR(est->w10_hat, kLambda * (1.0 - kP), est->half_width10);
    const auto direct = mc.chain(H);
    EXPECT_NEAR(static_cast<double>(chain.jump_times.size()), static_cast<double>(direct.jump_times.size()),
                0.02 * direct.jump_times.size() + 2);
}
