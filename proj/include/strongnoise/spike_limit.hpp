#pragma once

// Exact sampler of the strong-noise limit: the {0,1} Markov chain Q with rates
// 0->1 = lambda p and 1->0 = lambda (1-p), decorated by spikes whose maxima
// form a Poisson point process of intensity rate * dt x dm / m^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "strongnoise/errors.hpp"
#include "strongnoise/graph_metric.hpp"
#include "strongnoise/jump_chain.hpp"
#include "strongnoise/rng.hpp"
#include "strongnoise/scale_time.hpp"

namespace strongnoise {

inline void require_rates(double lambda, double p) {
    if (!(lambda > 0.0 && std::isfinite(lambda))) throw InvalidArgument("lambda must be > 0");
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("p must lie in (0,1)");
}

/// Jump rate out of `state`.
inline double exit_rate(int state, double lambda, double p) { return state == 0 ? lambda * p : lambda * (1.0 - p); }

inline JumpChain sample_Q(double lambda, double p, double x0, double H, std::uint64_t seed,
                          std::uint64_t trajectory = 0) {
    require_rates(lambda, p);
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InvalidArgument("x0 must lie in [0,1]");
    if (!(H > 0.0)) throw InvalidArgument("H must be > 0");
    CounterRng rng = make_stream(seed, trajectory);
    JumpChain chain;
    chain.horizon = H;
    chain.initial_state = uniform_open(rng) < x0 ? 1 : 0;
    int state = chain.initial_state;
    double t = 0.0;
    for (;;) {
        t += -std::log(uniform_open(rng)) / exit_rate(state, lambda, p);
        if (t > H) break;
        state = 1 - state;
        chain.jump_times.push_back(t);
        chain.states.push_back(state);
    }
    return chain;
}

/// A spike at time t: [0, m] out of state 0, [1-m, 1] out of state 1.
struct Spike {
    double t = 0.0;
    int state = 0;
    double m = 0.0;

    double lo() const noexcept { return state == 0 ? 0.0 : 1.0 - m; }
    double hi() const noexcept { return state == 0 ? m : 1.0; }
};

struct SpikeSet {
    std::vector<Spike> events;  // sorted by t

    std::size_t size() const noexcept { return events.size(); }
    void validate() const {
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& e = events[i];
            if (!(e.m >= 0.0 && e.m <= 1.0) || (e.state != 0 && e.state != 1))
                throw InvalidArgument("SpikeSet: bad event");
            if (i > 0 && e.t < events[i - 1].t) throw InvalidArgument("SpikeSet: events out of order");
        }
    }
};

struct FirstSpike {
    bool up_to_one = false;  // interval [y, 1]; otherwise [0, y]
    double lo = 0.0;
    double hi = 0.0;

    int state() const noexcept { return up_to_one ? 1 : 0; }
};

/// Spike at t = 0 for a start at x: [y,1] with probability x (y < x, density
/// (1-x)(1-y)^-2), else [0,y] (y > x, density x y^-2). Degenerate at x in {0,1}.
inline FirstSpike sample_first_spike(double x, CounterRng& rng) {
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("x0 must lie in [0,1]");
    if (x == 0.0) return {false, 0.0, 0.0};
    if (x == 1.0) return {true, 1.0, 1.0};
    const double pick = uniform_open(rng), u = uniform_open(rng);
    if (pick < x) return {true, u * x / (u * x + 1.0 - x), 1.0};
    return {false, 0.0, x / (1.0 - u * (1.0 - x))};
}

/// Inverse CDF of the maximum given M >= m_min: P(M >= m) = (1/m - 1) / (1/m_min - 1).
inline double spike_maximum(double u, double m_min) { return 1.0 / (1.0 + u * (1.0 / m_min - 1.0)); }

inline SpikeSet sample_spikes(double lambda, double p, const JumpChain& chain, double m_min, std::uint64_t seed,
                              std::uint64_t trajectory = 0) {
    require_rates(lambda, p);
    if (!(m_min > 0.0 && m_min < 1.0)) throw InvalidArgument("m_min must lie in (0,1)");
    CounterRng rng = make_stream(seed, trajectory);
    SpikeSet set;
    for (std::size_t i = 0; i < chain.epoch_count(); ++i) {
        const double a = chain.epoch_start(i), b = chain.epoch_end(i);
        const int state = chain.epoch_state(i);
        const double mean = exit_rate(state, lambda, p) * (b - a) * (1.0 / m_min - 1.0);
        const auto count = std::poisson_distribution<long long>(mean)(rng);
        for (long long j = 0; j < count; ++j) {
            const double t = a + (b - a) * uniform_open(rng);
            set.events.push_back({t, state, spike_maximum(uniform_open(rng), m_min)});
        }
    }
    std::sort(set.events.begin(), set.events.end(), [](const Spike& x, const Spike& y) { return x.t < y.t; });
    return set;
}

struct LimitSample {
    FirstSpike first;
    JumpChain chain;
    SpikeSet spikes;
};

/// Q_0 is the state the first spike attaches to, so P(Q_0 = 1) = x0.
inline LimitSample sample_limit_process(double lambda, double p, double x0, double H, double m_min,
                                        std::uint64_t seed, std::uint64_t trajectory = 0) {
    require_rates(lambda, p);
    CounterRng rng = make_stream(seed, 3 * trajectory);
    LimitSample out;
    out.first = sample_first_spike(x0, rng);
    out.chain = sample_Q(lambda, p, out.first.state(), H, seed, 3 * trajectory + 1);
    out.spikes = sample_spikes(lambda, p, out.chain, m_min, seed, 3 * trajectory + 2);
    return out;
}

/// Limit graph from the chain and its spikes: horizontal levels, full columns
/// at jumps, spike segments, and the first spike at t = 0.
inline PlanarSet limit_graph(const JumpChain& chain, const SpikeSet& spikes, double delta,
                             const FirstSpike* first = nullptr) {
    ColumnBuilder builder(chain.horizon, delta);
    for (std::size_t i = 0; i < chain.epoch_count(); ++i) {
        const double y = chain.epoch_state(i);
        builder.add_segment(chain.epoch_start(i), y, chain.epoch_end(i), y);
        if (i + 1 < chain.epoch_count()) builder.add_vertical(chain.epoch_end(i), 0.0, 1.0);
    }
    for (const auto& e : spikes.events)
        if (e.t <= chain.horizon) builder.add_vertical(e.t, e.lo(), e.hi());
    if (first) builder.add_vertical(0.0, first->lo, first->hi);
    return builder.finish();
}

/// Limit graph driven by beta: the image of l -> (C_l, y(beta_l)) where C is
/// the mixed local-time clock and y clamps (or folds) beta into [0,1].
inline PlanarSet limit_graph(const BrownianPath& beta, const MixedClock& clock, double H, double delta) {
    if (!(H <= clock.reached())) throw HorizonExhausted(H, clock.reached());
    ColumnBuilder builder(H, delta);
    const auto& b = beta.values;
    builder.add_point(0.0, clock.y_of(b[0]));
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
        const double c0 = clock.clock[k], c1 = clock.clock[k + 1];
        const double y0 = clock.y_of(b[k]), y1 = clock.y_of(b[k + 1]);
        if (c1 <= H) {
            builder.add_segment(c0, y0, c1, y1);
            continue;
        }
        const double frac = (H - c0) / (c1 - c0);
        builder.add_segment(c0, y0, H, y0 + frac * (y1 - y0));
        break;
    }
    return builder.finish();
}

inline PlanarSet limit_graph(const BrownianPath& beta, double lambda, double p, double H, double delta,
                             const ClockOptions& options = {}) {
    return limit_graph(beta, mixed_local_time_clock(beta, lambda, p, options), H, delta);
}

/// Reads Q off a limit graph: columns touching only 0 are state 0, only 1 are
/// state 1, full columns mark a crossing and give the jump time.
inline JumpChain chain_from_graph(const PlanarSet& graph, double tol = 1e-9) {
    JumpChain chain;
    chain.horizon = graph.horizon;
    int state = -1;
    double last_full = -1.0;
    for (const auto& c : graph.columns) {
        const bool at0 = c.lo <= tol, at1 = c.hi >= 1.0 - tol;
        if (at0 && at1) {
            last_full = c.t;
            continue;
        }
        const int s = at0 ? 0 : (at1 ? 1 : -1);
        if (s < 0) continue;
        if (state < 0) {
            state = s;
            chain.initial_state = s;
        } else if (s != state) {
            chain.jump_times.push_back(last_full >= 0.0 ? last_full : c.t);
            chain.states.push_back(s);
            state = s;
        }
        last_full = -1.0;
    }
    if (state < 0) throw InvalidArgument("chain_from_graph: no column touches {0,1}");
    return chain;
}

}  // namespace strongnoise
