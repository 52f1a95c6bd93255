#pragma once

// Estimators turning the limit statements into checks: occupation
// functionals, smoothing, jump-rate and spike-count estimators, KS distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "strongnoise/errors.hpp"
#include "strongnoise/jump_chain.hpp"
#include "strongnoise/spike_limit.hpp"
#include "strongnoise/twostate.hpp"

namespace strongnoise {

using PathFunctional = std::function<double(double, double)>;

/// Trapezoid rule for int f(t, X_t) dt along the samples of `path`.
inline double occupation_functional(const Path& path, const PathFunctional& f) {
    double total = 0.0;
    if (path.empty()) return total;
    double prev = f(path.times[0], path.values[0]);
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double cur = f(path.times[i], path.values[i]);
        total += 0.5 * (prev + cur) * (path.times[i] - path.times[i - 1]);
        prev = cur;
    }
    return total;
}

/// int_0^H f(t, Q_t) dt, each epoch integrated by adaptive quadrature.
inline double occupation_functional(const JumpChain& chain, const PathFunctional& f) {
    double total = 0.0;
    for (std::size_t i = 0; i < chain.epoch_count(); ++i) {
        const double a = chain.epoch_start(i), b = chain.epoch_end(i);
        if (!(b > a)) continue;
        const double x = chain.epoch_state(i);
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double t) { return f(t, x); }, a, b, 10, 1e-12);
    }
    return total;
}

/// Streaming trapezoid accumulator, for paths too long to store.
class OccupationAccumulator {
public:
    explicit OccupationAccumulator(PathFunctional f) : f_(std::move(f)) {}

    void operator()(double t, double x) {
        const double cur = f_(t, x);
        if (started_) total_ += 0.5 * (prev_ + cur) * (t - t_);
        started_ = true;
        prev_ = cur;
        t_ = t;
    }
    double value() const noexcept { return total_; }

private:
    PathFunctional f_;
    bool started_ = false;
    double prev_ = 0.0, t_ = 0.0, total_ = 0.0;
};

enum class SmoothingMode {
    MovingAverage,  // centered window, clipped at the ends
    Block,          // mean over consecutive blocks of the window length
};

/// Averages the linear interpolant of `path` over windows of length `window`;
/// the output shares the input grid. A non-positive window is the identity.
inline Path smooth(const Path& path, double window, SmoothingMode mode = SmoothingMode::MovingAverage) {
    if (!(window > 0.0) || path.size() < 2) return path;
    const std::size_t n = path.size();
    // I[i] = integral of the interpolant from times[0] to times[i].
    std::vector<double> I(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        I[i] = I[i - 1] + 0.5 * (path.values[i] + path.values[i - 1]) * (path.times[i] - path.times[i - 1]);
    const auto& t = path.times;
    auto integral_to = [&](double s, std::size_t& j) {
        while (j + 1 < n && t[j + 1] <= s) ++j;
        while (j > 0 && t[j] > s) --j;
        if (j + 1 >= n) return I[n - 1];
        const double dt = t[j + 1] - t[j];
        if (!(dt > 0.0)) return I[j];
        const double r = (s - t[j]) / dt;
        const double v = path.values[j] + r * (path.values[j + 1] - path.values[j]);
        return I[j] + 0.5 * (path.values[j] + v) * (s - t[j]);
    };

    Path out;
    out.times = path.times;
    out.values.resize(n);
    std::size_t ja = 0, jb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a, b;
        if (mode == SmoothingMode::MovingAverage) {
            a = std::max(t.front(), t[i] - 0.5 * window);
            b = std::min(t.back(), t[i] + 0.5 * window);
        } else {
            const double k = std::floor((t[i] - t.front()) / window);
            a = t.front() + k * window;
            b = std::min(t.back(), a + window);
        }
        if (!(b > a)) {
            out.values[i] = path.values[i];
            continue;
        }
        out.values[i] = (integral_to(b, jb) - integral_to(a, ja)) / (b - a);
    }
    return out;
}

struct RateEstimate {
    double w01_hat = 0.0, w10_hat = 0.0;
    std::size_t n01 = 0, n10 = 0;
    double time0 = 0.0, time1 = 0.0;
    double half_width01 = 0.0, half_width10 = 0.0;  // 3 sigma
};

namespace detail {

inline std::optional<RateEstimate> finish_rates(std::size_t n01, std::size_t n10, double s0, double s1) {
    if (n01 == 0 || n10 == 0 || !(s0 > 0.0) || !(s1 > 0.0)) return std::nullopt;
    RateEstimate r;
    r.n01 = n01;
    r.n10 = n10;
    r.time0 = s0;
    r.time1 = s1;
    r.w01_hat = static_cast<double>(n01) / s0;
    r.w10_hat = static_cast<double>(n10) / s1;
    r.half_width01 = 3.0 * r.w01_hat / std::sqrt(static_cast<double>(n01));
    r.half_width10 = 3.0 * r.w10_hat / std::sqrt(static_cast<double>(n10));
    return r;
}

}  // namespace detail

/// Hysteresis binarization: enter 1 above 1 - threshold, return to 0 below
/// threshold. Time before the first decision is not attributed.
inline std::optional<RateEstimate> estimate_jump_rates(const Path& path, double threshold = 0.2) {
    if (!(threshold > 0.0 && threshold < 0.5)) throw InvalidArgument("threshold must lie in (0, 1/2)");
    int state = -1;
    std::size_t n01 = 0, n10 = 0;
    double s[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0 && state >= 0) s[state] += path.times[i] - path.times[i - 1];
        const double v = path.values[i];
        if (state != 1 && v > 1.0 - threshold) {
            if (state == 0) ++n01;
            state = 1;
        } else if (state != 0 && v < threshold) {
            if (state == 1) ++n10;
            state = 0;
        }
    }
    return detail::finish_rates(n01, n10, s[0], s[1]);
}

inline std::optional<RateEstimate> estimate_jump_rates(const JumpChain& chain) {
    std::size_t n01 = 0, n10 = 0;
    for (int s : chain.states) (s == 1 ? n01 : n10)++;
    return detail::finish_rates(n01, n10, chain.time_in_state(0), chain.time_in_state(1));
}

struct SpikeCounts {
    std::size_t up = 0;    // excursions from near 0 reaching at least m
    std::size_t down = 0;  // excursions from near 1 reaching down to 1 - m
    double time0 = 0.0;    // time attributed to state 0
    double time1 = 0.0;
};

/// Counts maximal excursions out of the base-neighborhood of 0 (resp. 1) that
/// return without crossing over and whose height is at least m. The state is
/// tracked with the same hysteresis as estimate_jump_rates using `base`.
inline SpikeCounts count_spikes(const Path& path, double m, double base = 1e-3) {
    if (!(m > 0.0 && m < 1.0)) throw InvalidArgument("m must lie in (0,1)");
    if (!(base > 0.0 && base < m)) throw InvalidArgument("base must lie in (0, m)");
    SpikeCounts out;
    int state = -1;
    double height = 0.0;
    bool away = false;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const double v = path.values[i];
        if (i > 0 && state >= 0) (state == 0 ? out.time0 : out.time1) += path.times[i] - path.times[i - 1];
        const double dist = state == 1 ? 1.0 - v : v;  // distance from the current level
        if (state < 0) {
            if (v <= base) state = 0;
            else if (v >= 1.0 - base) state = 1;
            continue;
        }
        if (dist > 1.0 - base) {  // reached the other level: a jump, not a spike
            state = 1 - state;
            away = false;
            continue;
        }
        if (dist > base) {
            away = true;
            height = std::max(height, dist);
        } else if (away) {
            if (height >= m) (state == 0 ? out.up : out.down)++;
            away = false;
            height = 0.0;
        }
        if (!away) height = 0.0;
    }
    return out;
}

/// Exact counts for a sampled spike set; state times come from the chain.
inline SpikeCounts count_spikes(const SpikeSet& spikes, const JumpChain& chain, double m) {
    SpikeCounts out;
    for (const auto& e : spikes.events)
        if (e.m >= m) (e.state == 0 ? out.up : out.down)++;
    out.time0 = chain.time_in_state(0);
    out.time1 = chain.time_in_state(1);
    return out;
}

/// sup |F_n - F| including left limits, so atoms and ties are handled.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw InvalidArgument("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size();) {
        std::size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        const double x = samples[i];
        const double F = cdf(x);
        const double F_left = cdf(std::nextafter(x, -std::numeric_limits<double>::infinity()));
        d = std::max({d, std::abs(F - static_cast<double>(j) / n), std::abs(F_left - static_cast<double>(i) / n)});
        i = j;
    }
    return d;
}

}  // namespace strongnoise
