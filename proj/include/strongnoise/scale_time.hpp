#pragma once

// Scale function h of the scalar model, the density phi driving the
// Dambis-Dubins-Schwarz clock, local-time estimators, and the coupling
//
//     q_t = h^{-1}(beta_{T_t}),    dT^{-1}_l = phi(beta_l) dl,
//
// which realizes every gamma on one Brownian path beta.
//
// h is tabulated in logit coordinates z = log(q/(1-q)); the boundary layers
// near 0 and 1 that sharpen with gamma become O(1)-wide there.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "strongnoise/errors.hpp"
#include "strongnoise/jump_chain.hpp"
#include "strongnoise/rng.hpp"
#include "strongnoise/twostate.hpp"

namespace strongnoise {

namespace detail {

inline double softplus(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit(double q) noexcept { return std::log(q) - std::log1p(-q); }

/// Cubic Hermite on a cell of width w, t in [0,1].
inline double hermite(double t, double w, double y0, double y1, double d0, double d1) noexcept {
    const double t2 = t * t, t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * w * d0 + (3.0 * t2 - 2.0 * t3) * y1 +
           (t3 - t2) * w * d1;
}

/// Time a linear segment a -> b of duration dt spends in the open band (lo, hi).
inline double segment_band_time(double a, double b, double dt, double lo, double hi) noexcept {
    const double mn = std::min(a, b), mx = std::max(a, b);
    if (mx == mn) return (mn > lo && mn < hi) ? dt : 0.0;
    const double overlap = std::min(mx, hi) - std::max(mn, lo);
    return overlap > 0.0 ? dt * overlap / (mx - mn) : 0.0;
}

}  // namespace detail

/// F(u) = (1-2p) log(u/(1-u)) + p/u + (1-p)/(1-u), an antiderivative of
/// (u-p) / (u^2 (1-u)^2).
inline double scale_primitive(double u, double p) {
    return (1.0 - 2.0 * p) * detail::logit(u) + p / u + (1.0 - p) / (1.0 - u);
}

/// E(y) = int_p^y 2 lambda (u-p) / (gamma u^2 (1-u)^2) du, so h'(y) = exp(E(y)).
inline double inner_exponent(double y, const TwoStateParams& params) {
    params.require_positive();
    if (!(y > 0.0 && y < 1.0)) throw InvalidArgument("inner_exponent: y must lie in (0,1)");
    const double value = 2.0 * params.lambda / params.gamma *
                         (scale_primitive(y, params.p) - scale_primitive(params.p, params.p));
    return std::max(0.0, value);
}

inline constexpr double kPhiCap = 1e12;

struct PhiStats {
    std::size_t evaluations = 0;
    std::size_t capped = 0;
};

struct ScaleGrid {
    double dz = 1e-3;              // logit spacing of the table
    double z_limit = 60.0;         // hard bound on |z|
    double x_limit = 1e6;          // table extends until |h| exceeds this ...
    double exponent_floor = 40.0;  // ... and E exceeds this
};

/// h anchored at q0 (h(q0) = q0), with its inverse and phi.
class ScaleFunction {
public:
    ScaleFunction(const TwoStateParams& params, double q0, const ScaleGrid& grid = {})
        : params_(params), q0_(q0), grid_(grid) {
        params_.require_positive();
        if (!(q0 > 0.0 && q0 < 1.0)) throw InvalidArgument("scale anchor q0 must lie in (0,1)");
        if (!(grid.dz > 0.0) || !(grid.z_limit > 0.0)) throw InvalidArgument("bad scale grid");
        c_ = 2.0 * params_.lambda / params_.gamma;
        Fp_ = scale_primitive(params_.p, params_.p);
        za_ = detail::logit(q0);
        build();
    }

    const TwoStateParams& params() const noexcept { return params_; }
    double anchor() const noexcept { return q0_; }

    double exponent_at_logit(double z) const noexcept {
        const double p = params_.p;
        const double v =
            c_ * ((1.0 - 2.0 * p) * z + p * (1.0 + std::exp(-z)) + (1.0 - p) * (1.0 + std::exp(z)) - Fp_);
        return std::max(0.0, v);
    }

    /// log(dh/dz) = E + log q + log(1-q).
    double log_slope_at_logit(double z) const noexcept {
        return exponent_at_logit(z) - detail::softplus(z) - detail::softplus(-z);
    }

    double inner_exponent(double x) const {
        if (!(x > 0.0 && x < 1.0)) throw InvalidArgument("inner_exponent: x must lie in (0,1)");
        return exponent_at_logit(detail::logit(x));
    }

    double derivative(double x) const { return std::exp(inner_exponent(x)); }

    /// Accurate h(x) for x in (0,1).
    double operator()(double x) const {
        if (!(x > 0.0 && x < 1.0)) throw InvalidArgument("scale: x must lie in (0,1)");
        return value_at_logit(detail::logit(x));
    }

    double value_at_logit(double z) const {
        std::size_t i;
        if (z <= z_at(0)) i = 0;
        else if (z >= z_at(size() - 1)) i = size() - 1;
        else i = std::min(size() - 2, static_cast<std::size_t>((z - z_at(0)) / grid_.dz));
        const double zi = z_at(i);
        if (z == zi) return x_[i];
        // Beyond the table the slope only grows; past exp(700) the value is out of range.
        if ((z < zi || z > zi + grid_.dz) && log_slope_at_logit(z) > 700.0)
            return z < zi ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        const double lo = std::min(z, zi), hi = std::max(z, zi);
        const double part = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            [this](double u) { return std::exp(log_slope_at_logit(u)); }, lo, hi, 8, 1e-10);
        const double sign = z > zi ? 1.0 : -1.0;
        if (std::isnan(part)) return sign * std::numeric_limits<double>::infinity();
        return x_[i] + sign * part;
    }

    /// Accurate inverse by bisection in z to a 1e-12 bracket.
    double inverse_logit(double y) const {
        double lo, hi;
        if (y <= x_.front()) {
            hi = z_at(0);
            for (double d = 1.0;; d *= 2.0) {
                lo = hi - d;
                if (value_at_logit(lo) < y || lo < -745.0) break;
            }
        } else if (y >= x_.back()) {
            lo = z_at(size() - 1);
            for (double d = 1.0;; d *= 2.0) {
                hi = lo + d;
                if (value_at_logit(hi) > y || hi > 745.0) break;
            }
        } else {
            const std::size_t i = cell_of(y);
            lo = z_at(i);
            hi = z_at(i + 1);
        }
        auto f = [&](double z) { return std::clamp(value_at_logit(z) - y, -1e300, 1e300); };
        std::uintmax_t iterations = 200;
        try {
            const auto bracket = boost::math::tools::bisect(
                f, lo, hi, [](double a, double b) { return std::abs(b - a) <= 1e-12; }, iterations);
            return 0.5 * (bracket.first + bracket.second);
        } catch (const std::exception&) {
            throw ConvergenceFailure(lo, hi);
        }
    }

    double inverse(double y) const { return to_unit(inverse_logit(y)); }

    /// Table-based inverse (cubic Hermite of z(x)); `hint` speeds sequential lookups.
    double inverse_logit_fast(double y, std::size_t& hint) const {
        if (!(y > x_.front() && y < x_.back())) return inverse_logit(y);
        hint = locate(y, hint);
        return logit_in_cell(y, hint);
    }

    double inverse_fast(double y) const {
        std::size_t hint = anchor_index_;
        return to_unit(inverse_logit_fast(y, hint));
    }
    double inverse_fast(double y, std::size_t& hint) const { return to_unit(inverse_logit_fast(y, hint)); }

    /// phi(y) = 1 / (gamma (dh/dz)^2) at z = h^{-1}(y), evaluated in log space and capped.
    double phi_at_logit(double z, PhiStats* stats = nullptr) const {
        const double log_phi = -std::log(params_.gamma) - 2.0 * log_slope_at_logit(z);
        if (stats) ++stats->evaluations;
        if (log_phi > std::log(kPhiCap)) {
            if (stats) ++stats->capped;
            return kPhiCap;
        }
        return std::exp(log_phi);
    }

    double phi(double y, PhiStats* stats = nullptr) const {
        std::size_t hint = anchor_index_;
        return phi_at_logit(inverse_logit_fast(y, hint), stats);
    }
    double phi(double y, std::size_t& hint, PhiStats* stats = nullptr) const {
        return phi_at_logit(inverse_logit_fast(y, hint), stats);
    }

    /// Phi(y) = int_{-inf}^y phi(x) dx.
    double phi_primitive(double y, std::size_t& hint) const {
        if (!(y > x_.front())) return lower_tail(inverse_logit(y));
        if (!(y < x_.back())) return mass_ - upper_tail(inverse_logit(y));
        hint = locate(y, hint);
        const double z = logit_in_cell(y, hint);
        const double t = std::clamp((z - z_at(hint)) / grid_.dz, 0.0, 1.0);
        return detail::hermite(t, grid_.dz, psi_[hint], psi_[hint + 1], dpsi_[hint], dpsi_[hint + 1]);
    }
    double phi_primitive(double y) const {
        std::size_t hint = anchor_index_;
        return phi_primitive(y, hint);
    }

    /// int phi over the real line; tends to 1/(2 lambda p) + 1/(2 lambda (1-p)).
    double phi_mass() const noexcept { return mass_; }

    /// int f(x) phi(x) dx, computed in z where the integrand is smooth.
    double integrate_against_phi(const std::function<double(double)>& f) const {
        double total = 0.0;
        const std::size_t n = size();
        // Whole cells in blocks of 64 keep the quadrature local.
        for (std::size_t i = 0; i + 1 < n; i += 64) {
            const std::size_t j = std::min(n - 1, i + 64);
            total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double z) { return f(value_fast_at_logit(z)) * psi_density(z); }, z_at(i), z_at(j), 8,
                1e-13);
        }
        return total;
    }

    /// Table-interpolated h at logit z (inside the table).
    double value_fast_at_logit(double z) const noexcept {
        const std::size_t i = std::min(
            size() - 2, static_cast<std::size_t>(std::max(0.0, (z - z_at(0)) / grid_.dz)));
        const double t = std::clamp((z - z_at(i)) / grid_.dz, 0.0, 1.0);
        return detail::hermite(t, grid_.dz, x_[i], x_[i + 1], s_[i], s_[i + 1]);
    }

    std::size_t size() const noexcept { return x_.size(); }
    double table_min() const noexcept { return x_.front(); }
    double table_max() const noexcept { return x_.back(); }
    std::size_t anchor_index() const noexcept { return anchor_index_; }

private:
    double z_at(std::size_t i) const noexcept {
        return za_ + (static_cast<double>(i) - static_cast<double>(anchor_index_)) * grid_.dz;
    }

    double to_unit(double z) const noexcept {
        return std::clamp(detail::logistic(z), std::numeric_limits<double>::min(),
                          std::nextafter(1.0, 0.0));
    }

    double slope(double z) const noexcept { return std::exp(log_slope_at_logit(z)); }

    /// d Phi / dz = exp(-E) / (gamma q (1-q)).
    double psi_density(double z) const noexcept {
        return std::exp(-exponent_at_logit(z) + detail::softplus(z) + detail::softplus(-z)) / params_.gamma;
    }

    // Asymptotic tails of Phi beyond the table: E ~ c p e^{-z} below, c (1-p) e^{z} above.
    double lower_tail(double z) const noexcept {
        return std::exp(-exponent_at_logit(z)) / (2.0 * params_.lambda * params_.p);
    }
    double upper_tail(double z) const noexcept {
        return std::exp(-exponent_at_logit(z)) / (2.0 * params_.lambda * (1.0 - params_.p));
    }

    void build() {
        using Gauss = boost::math::quadrature::gauss<double, 8>;
        const double dz = grid_.dz;
        auto h_cell = [this](double a, double b) {
            return Gauss::integrate([this](double u) { return slope(u); }, a, b);
        };
        auto done = [this](double z, double x) {
            return std::abs(z) > grid_.z_limit ||
                   (std::abs(x) > grid_.x_limit && exponent_at_logit(z) > grid_.exponent_floor);
        };

        std::vector<double> down{q0_}, up{q0_};
        for (std::size_t k = 1;; ++k) {
            const double z1 = za_ - static_cast<double>(k) * dz, z0 = z1 + dz;
            const double x = down.back() - h_cell(z1, z0);
            if (!std::isfinite(x)) break;
            down.push_back(x);
            if (done(z1, x)) break;
        }
        for (std::size_t k = 1;; ++k) {
            const double z0 = za_ + static_cast<double>(k - 1) * dz, z1 = z0 + dz;
            const double x = up.back() + h_cell(z0, z1);
            if (!std::isfinite(x)) break;
            up.push_back(x);
            if (done(z1, x)) break;
        }
        anchor_index_ = down.size() - 1;
        x_.assign(down.rbegin(), down.rend());
        x_.insert(x_.end(), up.begin() + 1, up.end());

        const std::size_t n = x_.size();
        s_.resize(n);
        psi_.resize(n);
        dpsi_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s_[i] = slope(z_at(i));
            dpsi_[i] = psi_density(z_at(i));
        }
        psi_[0] = lower_tail(z_at(0));
        for (std::size_t i = 0; i + 1 < n; ++i)
            psi_[i + 1] = psi_[i] + Gauss::integrate([this](double u) { return psi_density(u); }, z_at(i),
                                                     z_at(i + 1));
        mass_ = psi_.back() + upper_tail(z_at(n - 1));
    }

    std::size_t cell_of(double y) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), y);
        const auto i = static_cast<std::size_t>(it - x_.begin());
        return std::clamp<std::size_t>(i, 1, size() - 1) - 1;
    }

    /// Cell i with x_[i] <= y < x_[i+1], galloping from `hint`.
    std::size_t locate(double y, std::size_t hint) const {
        const std::size_t last = size() - 2;
        std::size_t i = std::min(hint, last);
        if (x_[i] <= y) {
            if (y < x_[i + 1]) return i;
            std::size_t lo = i + 1, step = 1;
            while (lo + step <= last && x_[lo + step] <= y) {
                lo += step;
                step *= 2;
            }
            const std::size_t hi = std::min(lo + step, last + 1);
            const auto it = std::upper_bound(x_.begin() + lo, x_.begin() + hi + 1, y);
            return static_cast<std::size_t>(it - x_.begin()) - 1;
        }
        std::size_t hi = i, step = 1;
        while (hi >= step && x_[hi - step] > y) {
            hi -= step;
            step *= 2;
        }
        const std::size_t lo = hi >= step ? hi - step : 0;
        const auto it = std::upper_bound(x_.begin() + lo, x_.begin() + hi + 1, y);
        return std::max<std::size_t>(static_cast<std::size_t>(it - x_.begin()), 1) - 1;
    }

    double logit_in_cell(double y, std::size_t i) const noexcept {
        const double w = x_[i + 1] - x_[i];
        const double t = (y - x_[i]) / w;
        const double z = detail::hermite(t, w, z_at(i), z_at(i + 1), 1.0 / s_[i], 1.0 / s_[i + 1]);
        return std::clamp(z, z_at(i), z_at(i + 1));
    }

    TwoStateParams params_;
    double q0_;
    ScaleGrid grid_;
    double c_ = 0.0, Fp_ = 0.0, za_ = 0.0, mass_ = 0.0;
    std::size_t anchor_index_ = 0;
    std::vector<double> x_, s_, psi_, dpsi_;
};

// One-shot conveniences; build a ScaleFunction once for repeated use.
inline double scale(double x, const TwoStateParams& params, double q0) { return ScaleFunction(params, q0)(x); }
inline double scale_inverse(double y, const TwoStateParams& params, double q0) {
    return ScaleFunction(params, q0).inverse(y);
}
inline double phi(double x, const TwoStateParams& params, double q0 = 0.5) {
    return ScaleFunction(params, q0).phi(x);
}

/// Standard Brownian motion on the uniform effective-time grid k * dt_eff.
struct BrownianPath {
    double dt_eff = 0.0;
    std::vector<double> values;

    double x0() const { return values.front(); }
    std::size_t size() const noexcept { return values.size(); }
    double horizon() const noexcept { return dt_eff * static_cast<double>(values.size() - 1); }
};

inline BrownianPath sample_brownian(double x0, double dt_eff, double L, std::uint64_t seed,
                                    std::uint64_t trajectory = 0) {
    if (!(dt_eff > 0.0)) throw InvalidArgument("dt_eff must be > 0");
    if (!std::isfinite(x0)) throw InvalidArgument("x0 must be finite");
    const std::size_t n = step_count(L, dt_eff);
    BrownianPath path;
    path.dt_eff = dt_eff;
    path.values.resize(n + 1);
    path.values[0] = x0;
    BrownianIncrements dW(make_stream(seed, trajectory), dt_eff);
    for (std::size_t k = 1; k <= n; ++k) path.values[k] = path.values[k - 1] + dW();
    return path;
}

/// T^{-1} on the grid of beta.
struct TimeChange {
    double dt_eff = 0.0;
    std::vector<double> tinv;

    double ell(std::size_t k) const noexcept { return dt_eff * static_cast<double>(k); }
    double reached() const noexcept { return tinv.back(); }
};

enum class ClockQuadrature {
    Interpolant,  // exact integral of phi along the piecewise-linear beta
    Trapezoid,
};

/// dT^{-1} = phi(beta) dl accumulated along beta.
inline TimeChange time_change_inverse(const BrownianPath& beta, const ScaleFunction& h,
                                      ClockQuadrature scheme = ClockQuadrature::Interpolant,
                                      PhiStats* stats = nullptr) {
    TimeChange tc;
    tc.dt_eff = beta.dt_eff;
    tc.tinv.resize(beta.size());
    tc.tinv[0] = 0.0;
    const double dt = beta.dt_eff;
    std::size_t hint = h.anchor_index();
    const auto& b = beta.values;
    if (scheme == ClockQuadrature::Trapezoid) {
        double prev = h.phi(b[0], hint, stats);
        for (std::size_t k = 1; k < b.size(); ++k) {
            const double cur = h.phi(b[k], hint, stats);
            tc.tinv[k] = tc.tinv[k - 1] + 0.5 * dt * (prev + cur);
            if (!std::isfinite(tc.tinv[k])) throw ClockOverflow(k);
            prev = cur;
        }
        return tc;
    }
    double Phi_prev = h.phi_primitive(b[0], hint);
    for (std::size_t k = 1; k < b.size(); ++k) {
        const double Phi_cur = h.phi_primitive(b[k], hint);
        const double step = b[k] - b[k - 1];
        double mean;
        if (std::abs(step) < 1e-7) {
            std::size_t mid_hint = hint;
            mean = h.phi(0.5 * (b[k] + b[k - 1]), mid_hint, stats);
        } else {
            mean = std::max(0.0, (Phi_cur - Phi_prev) / step);
        }
        tc.tinv[k] = tc.tinv[k - 1] + dt * mean;
        if (!std::isfinite(tc.tinv[k])) throw ClockOverflow(k);
        Phi_prev = Phi_cur;
    }
    return tc;
}

inline TimeChange time_change_inverse(const BrownianPath& beta, const TwoStateParams& params,
                                      ClockQuadrature scheme = ClockQuadrature::Interpolant) {
    return time_change_inverse(beta, ScaleFunction(params, beta.x0()), scheme);
}

inline double default_local_time_epsilon(double dt_eff) { return std::max(std::sqrt(dt_eff), 1e-4); }

/// (1/2eps) Leb{u <= ell : |beta_u - a| < eps} for the linear interpolant of beta.
inline double local_time(const BrownianPath& beta, double a, double ell, double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidArgument("local_time: epsilon must be > 0");
    const std::size_t n = std::min(step_count(ell, beta.dt_eff), beta.size() - 1);
    double occupied = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        occupied += detail::segment_band_time(beta.values[k], beta.values[k + 1], beta.dt_eff, a - epsilon,
                                              a + epsilon);
    return occupied / (2.0 * epsilon);
}

/// Free: beta as is, levels 0 and 1. Reflected: beta folded into [0,1], so
/// even integers act as 0 and odd integers as 1.
enum class ClockBoundary { Free, Reflected };

struct ClockOptions {
    double epsilon = 0.0;  // 0 selects default_local_time_epsilon(dt_eff)
    ClockBoundary boundary = ClockBoundary::Free;
};

inline double fold_unit(double x) noexcept {
    const double r = std::fmod(std::abs(x), 2.0);
    return r <= 1.0 ? r : 2.0 - r;
}

/// Real time C_k = L^0/(2 lambda p) + L^1/(2 lambda (1-p)) accumulated by beta
/// up to grid index k, and the {0,1} chain Q = beta_sigma it induces.
struct MixedClock {
    double dt_eff = 0.0;
    double epsilon = 0.0;
    ClockBoundary boundary = ClockBoundary::Free;
    std::vector<double> clock;
    int initial_state = -1;  // -1: beta never reached {0,1}
    std::size_t first_hit = 0;
    std::vector<double> switch_times;
    std::vector<std::size_t> switch_index;  // grid segment of each switch

    double reached() const noexcept { return clock.back(); }

    /// Smallest grid index k with C_k > t.
    std::size_t sigma_index(double t) const {
        if (!(t < reached())) throw HorizonExhausted(t, reached());
        return static_cast<std::size_t>(std::upper_bound(clock.begin(), clock.end(), t) - clock.begin());
    }
    double sigma(double t) const { return dt_eff * static_cast<double>(sigma_index(t)); }

    double y_of(double beta) const noexcept {
        return boundary == ClockBoundary::Free ? std::clamp(beta, 0.0, 1.0) : fold_unit(beta);
    }

    JumpChain chain(double H) const {
        if (initial_state < 0 || !(H <= reached())) throw HorizonExhausted(H, initial_state < 0 ? 0.0 : reached());
        JumpChain out;
        out.initial_state = initial_state;
        out.horizon = H;
        int state = initial_state;
        for (double t : switch_times) {
            if (t > H) break;
            state = 1 - state;
            out.jump_times.push_back(t);
            out.states.push_back(state);
        }
        return out;
    }
};

inline MixedClock mixed_local_time_clock(const BrownianPath& beta, double lambda, double p,
                                         const ClockOptions& options = {}) {
    if (!(lambda > 0.0) || !(p > 0.0 && p < 1.0)) throw InvalidArgument("clock: need lambda > 0, p in (0,1)");
    MixedClock mc;
    mc.dt_eff = beta.dt_eff;
    mc.boundary = options.boundary;
    mc.epsilon = options.epsilon > 0.0 ? options.epsilon : default_local_time_epsilon(beta.dt_eff);
    const double eps = mc.epsilon, dt = beta.dt_eff;
    const double w0 = 1.0 / (2.0 * lambda * p), w1 = 1.0 / (2.0 * lambda * (1.0 - p));
    const bool free = options.boundary == ClockBoundary::Free;
    const auto& b = beta.values;
    mc.clock.assign(b.size(), 0.0);

    auto parity_state = [](double m) { return std::fmod(std::abs(m), 2.0) == 0.0 ? 0 : 1; };

    int state = -1;
    if (free ? (b[0] == 0.0 || b[0] == 1.0) : (std::floor(b[0]) == b[0])) {
        state = free ? static_cast<int>(b[0]) : parity_state(b[0]);
        mc.initial_state = state;
    }
    double C = 0.0;
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
        const double a = b[k], c = b[k + 1];
        const double mn = std::min(a, c), mx = std::max(a, c);
        // Level crossings inside this segment, in the order they are met.
        double cross_level = std::numeric_limits<double>::quiet_NaN();
        int cross_state = -1;
        if (free) {
            for (double level : {0.0, 1.0}) {
                if (mn <= level && level <= mx && (state < 0 || static_cast<int>(level) != state)) {
                    if (std::isnan(cross_level) || std::abs(level - a) < std::abs(cross_level - a)) {
                        cross_level = level;
                        cross_state = static_cast<int>(level);
                    }
                }
            }
        } else {
            const double first = c >= a ? std::ceil(a) : std::floor(a);
            const double dir = c >= a ? 1.0 : -1.0;
            for (double m = first; dir * (c - m) >= 0.0; m += dir) {
                const int s = parity_state(m);
                if (state < 0 || s != state) {
                    cross_level = m;
                    cross_state = s;
                    break;
                }
            }
        }

        if (state < 0 && cross_state >= 0) {
            state = cross_state;
            mc.initial_state = state;
            mc.first_hit = k;
            cross_state = -1;
        }
        if (state >= 0) {
            double increment = 0.0;
            if (free) {
                increment = (w0 * detail::segment_band_time(a, c, dt, -eps, eps) +
                             w1 * detail::segment_band_time(a, c, dt, 1.0 - eps, 1.0 + eps)) /
                            (2.0 * eps);
            } else {
                for (double m = std::floor(mn - eps); m <= std::ceil(mx + eps); m += 1.0)
                    increment += (parity_state(m) == 0 ? w0 : w1) *
                                 detail::segment_band_time(a, c, dt, m - eps, m + eps) / eps;
            }
            if (cross_state >= 0) {
                const double frac = mx > mn ? std::abs(cross_level - a) / (mx - mn) : 0.0;
                const double t = C + frac * increment;
                if (!mc.switch_times.empty() && !(t > mc.switch_times.back())) {
                    // Two switches at one instant cancel.
                    mc.switch_times.pop_back();
                    mc.switch_index.pop_back();
                } else {
                    mc.switch_times.push_back(t);
                    mc.switch_index.push_back(k);
                }
                state = cross_state;
            }
            C += increment;
        }
        mc.clock[k + 1] = C;
    }
    return mc;
}

/// Calls visit(t, q) along q_t = h^{-1}(beta_{T_t}) for t in [0, H]; the last
/// call is at t = H exactly.
template <class Visitor>
void for_each_coupled_sample(const BrownianPath& beta, const TimeChange& tc, const ScaleFunction& h, double H,
                             Visitor&& visit) {
    if (!(H >= 0.0)) throw InvalidArgument("horizon must be >= 0");
    if (!(tc.reached() >= H)) throw HorizonExhausted(H, tc.reached());
    std::size_t hint = h.anchor_index();
    const auto& b = beta.values;
    for (std::size_t k = 0; k < b.size(); ++k) {
        if (tc.tinv[k] >= H) {
            const double t0 = tc.tinv[k - (k > 0)], t1 = tc.tinv[k];
            const double frac = (k > 0 && t1 > t0) ? (H - t0) / (t1 - t0) : 1.0;
            const double y = k > 0 ? b[k - 1] + frac * (b[k] - b[k - 1]) : b[0];
            visit(H, h.inverse_fast(y, hint));
            return;
        }
        visit(tc.tinv[k], h.inverse_fast(b[k], hint));
    }
}

inline Path coupled_trajectory(const BrownianPath& beta, const ScaleFunction& h, double H) {
    const TimeChange tc = time_change_inverse(beta, h);
    Path path;
    for_each_coupled_sample(beta, tc, h, H, [&](double t, double q) {
        path.times.push_back(t);
        path.values.push_back(q);
    });
    return path;
}

/// beta must start at q0, which anchors h.
inline Path coupled_trajectory(const BrownianPath& beta, const TwoStateParams& params, double q0, double H) {
    if (beta.x0() != q0) throw InvalidArgument("coupled_trajectory: beta must start at q0");
    return coupled_trajectory(beta, ScaleFunction(params, q0), H);
}

}  // namespace strongnoise
