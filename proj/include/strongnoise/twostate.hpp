#pragma once

// Euler-Maruyama simulation of the scalar strong-measurement model
//
//     dq = -lambda (q - p) dt + sqrt(gamma) q (1 - q) dW,   q in [0,1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "strongnoise/errors.hpp"
#include "strongnoise/rng.hpp"

namespace strongnoise {

struct TwoStateParams {
    double lambda = 1.0;  // mean-reversion speed
    double p = 0.5;       // long-term mean
    double gamma = 1.0;   // noise strength

    /// Accepts the degenerate lambda = 0 or gamma = 0 models used as sanity
    /// checks; rejects negative, non-finite, or p outside (0,1).
    void validate() const {
        if (!std::isfinite(lambda) || lambda < 0.0)
            throw InvalidArgument("lambda must be finite and >= 0, got " + std::to_string(lambda));
        if (!std::isfinite(gamma) || gamma < 0.0)
            throw InvalidArgument("gamma must be finite and >= 0, got " + std::to_string(gamma));
        if (!(p > 0.0 && p < 1.0))
            throw InvalidArgument("p must lie in (0,1), got " + std::to_string(p));
    }

    /// Strict form required by the scale-function machinery.
    void require_positive() const {
        validate();
        if (lambda <= 0.0) throw InvalidArgument("lambda must be > 0");
        if (gamma <= 0.0) throw InvalidArgument("gamma must be > 0");
    }
};

/// Sampled real-valued trajectory. Times are nondecreasing: paths produced by
/// the time-change construction may repeat a time stamp across a spike.
struct Path {
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }
    double duration() const noexcept { return empty() ? 0.0 : times.back() - times.front(); }

    void validate(double lo = -1e-12, double hi = 1.0 + 1e-12) const {
        if (times.size() != values.size()) throw InvalidArgument("path: times/values length mismatch");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
                throw InvalidArgument("path: non-finite sample at index " + std::to_string(i));
            if (i > 0 && times[i] < times[i - 1])
                throw InvalidArgument("path: times decrease at index " + std::to_string(i));
            if (values[i] < lo || values[i] > hi)
                throw InvalidArgument("path: value out of range at index " + std::to_string(i));
        }
    }
};

struct StepStats {
    std::size_t steps = 0;
    std::size_t clamps = 0;
};

/// Default step-size rule: dt = min(dt_user, c / gamma).
inline double effective_dt(double dt_user, double gamma, double c = 0.01) {
    if (!(dt_user > 0.0)) throw InvalidArgument("dt must be > 0");
    return gamma > 0.0 ? std::min(dt_user, c / gamma) : dt_user;
}

/// Number of steps covering [0, T] with step dt, i.e. floor(T/dt) robust to
/// representation error in T/dt.
inline std::size_t step_count(double T, double dt) {
    if (!(T >= 0.0)) throw InvalidArgument("T must be >= 0");
    const double ratio = T / dt;
    return static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12) + 1e-9));
}

/// One Euler-Maruyama step, clamped into [0,1]. A clamp is recorded in `stats`.
inline double em_step(const TwoStateParams& params, double q, double dt, double dW,
                      StepStats* stats = nullptr) {
    const double next = q - params.lambda * (q - params.p) * dt +
                        std::sqrt(params.gamma) * q * (1.0 - q) * dW;
    const double clamped = std::clamp(next, 0.0, 1.0);
    if (stats) {
        ++stats->steps;
        if (clamped != next) ++stats->clamps;
    }
    return clamped;
}

struct SimulateOptions {
    std::size_t stride = 1;              // keep every stride-th sample
    std::size_t max_steps = 2'000'000'000;
    double dt_factor = 0.01;             // c in dt = min(dt_user, c / gamma)
    bool apply_dt_rule = true;
    std::uint64_t trajectory = 0;        // stream index within the seed
};

/// Simulates the scalar model on [0, T]. Sample k sits at time k * dt where dt
/// is the effective step after the step-size rule.
inline Path simulate(const TwoStateParams& params, double q0, double dt, double T, std::uint64_t seed,
                     const SimulateOptions& options = {}, StepStats* stats = nullptr) {
    params.validate();
    if (!(q0 >= 0.0 && q0 <= 1.0)) throw InvalidArgument("q0 must lie in [0,1]");
    if (options.stride == 0) throw InvalidArgument("stride must be >= 1");
    const double h = options.apply_dt_rule ? effective_dt(dt, params.gamma, options.dt_factor) : dt;
    if (!(h > 0.0)) throw InvalidArgument("dt must be > 0");
    const std::size_t n = step_count(T, h);
    if (n > options.max_steps) throw StepBudgetExceeded(n, options.max_steps);

    Path path;
    path.times.reserve(n / options.stride + 1);
    path.values.reserve(n / options.stride + 1);
    path.times.push_back(0.0);
    path.values.push_back(q0);

    BrownianIncrements dW(make_stream(seed, options.trajectory), h);
    StepStats local;
    double q = q0;
    for (std::size_t k = 1; k <= n; ++k) {
        q = em_step(params, q, h, dW(), &local);
        if (k % options.stride == 0) {
            path.times.push_back(static_cast<double>(k) * h);
            path.values.push_back(q);
        }
    }
    if (stats) {
        stats->steps += local.steps;
        stats->clamps += local.clamps;
    }
    return path;
}

}  // namespace strongnoise
