#pragma once

// Acceptance suite: ten numbered criteria, each returning a CriterionResult.
// Criteria 4, 5 and 7 share one fixed-beta study (see FixedBetaStudy).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "strongnoise/belavkin.hpp"
#include "strongnoise/graph_metric.hpp"
#include "strongnoise/rng.hpp"
#include "strongnoise/scale_time.hpp"
#include "strongnoise/spike_limit.hpp"
#include "strongnoise/stats.hpp"
#include "strongnoise/twostate.hpp"

namespace strongnoise {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::vector<std::pair<std::string, double>> measured;
    std::string detail;
    double seconds = 0.0;
    double time_limit = 0.0;  // seconds; counted in `passed`
};

struct ValidationConfig {
    std::uint64_t seed = kDefaultSeed;
    double lambda = 1.0;
    double p = 0.3;
    unsigned workers = 1;
    std::vector<double> gammas{1e2, 1e3, 1e4};
    // Fixed-beta study.
    double beta_L = 50.0;
    double beta_dt = 1e-6;
    double beta_x0 = 0.3;
    double graph_delta = 1e-3;
    double m_min = 1e-3;
};

namespace detail {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

inline std::string join(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
}

inline void finish(CriterionResult& r, bool ok, const Stopwatch& sw) {
    r.seconds = sw.seconds();
    r.passed = ok && r.seconds < r.time_limit;
    if (ok && !r.passed) r.detail += " (time limit exceeded)";
}

inline CMatrix random_complex_matrix(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
    return m;
}

// A A^dag normalized, mixed with the identity by `mix`.
inline DensityMatrix random_density(Eigen::Index n, std::mt19937_64& rng, double mix) {
    const CMatrix a = random_complex_matrix(n, rng);
    CMatrix m = a * a.adjoint();
    m /= m.trace().real();
    m = (1.0 - mix) * m + mix * CMatrix::Identity(n, n) / static_cast<double>(n);
    m /= m.trace().real();
    return DensityMatrix::from_matrix(m);
}

inline ThermalModel random_thermal_model(Eigen::Index n, std::mt19937_64& rng, double gamma) {
    std::uniform_real_distribution<double> u(-0.5, 0.5), mag(0.3, 1.2);
    ThermalModel model;
    model.Gamma = CMatrix(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
            model.Gamma(k, l) = std::polar(mag(rng), 2.0 * std::numbers::pi * u(rng));
    model.n_values = CVector(n);
    model.epsilon = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        model.n_values(i) = Complex(u(rng), u(rng));
        model.epsilon(i) = 2.0 * u(rng);
    }
    model.gamma = gamma;
    return model;
}

// Smooth bump on [0, H], equal to 1 at H/2.
inline double time_bump(double t, double H) {
    const double s = 2.0 * t / H - 1.0;
    if (!(std::abs(s) < 1.0)) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

}  // namespace detail

/// 1. Trace and Hermiticity along a random three-level run; Bloch ball for two levels.
inline CriterionResult criterion_1(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{1, "conservation", false, {}, "", 0.0, 10.0};
    std::mt19937_64 rng(cfg.seed);
    const auto model = detail::random_thermal_model(3, rng, 10.0).to_belavkin();
    DensityMatrix rho = detail::random_density(3, rng, 0.5);
    BrownianIncrements dW(make_stream(cfg.seed, 1), 1e-3);
    MatrixStepReport report;
    double trace_drift = 0.0, herm = 0.0;
    for (int k = 0; k < 100000; ++k) {
        rho = em_step_matrix(model, rho, 1e-3, dW(), {}, &report);
        trace_drift = std::max(trace_drift, std::abs(report.trace_before - 1.0));
        herm = std::max(herm, hermiticity_defect(rho.matrix()));
    }

    double bloch = -std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> rate(0.1, 2.0), split(-3.0, 3.0), strength(0.5, 20.0);
    for (std::uint64_t run = 0; run < 10; ++run) {
        const auto thermal = two_state_thermal_model(rate(rng), rate(rng), split(rng), strength(rng));
        BelavkinOptions options;
        options.trajectory = 100 + run;
        const auto traj = simulate_belavkin(thermal.to_belavkin(), detail::random_density(2, rng, 0.1), 1e-3, 10.0,
                                            cfg.seed, options);
        for (const auto& s : traj.states) bloch = std::max(bloch, bloch_excess(s));
    }
    r.measured = {{"max_trace_drift", trace_drift}, {"max_hermiticity_defect", herm}, {"max_bloch_excess", bloch}};
    r.detail = "1e5 steps n=3; 10 two-level runs of 1e4 steps";
    detail::finish(r, trace_drift < 1e-10 && herm == 0.0 && bloch <= 1e-9, sw);
    return r;
}

/// 2. Matrix, componentwise and scalar steps agree entry by entry.
inline CriterionResult criterion_2(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{2, "form_equivalence", false, {}, "", 0.0, 1.0};
    std::mt19937_64 rng(cfg.seed + 2);
    std::uniform_real_distribution<double> rate(0.1, 2.0), split(-3.0, 3.0), strength(0.5, 20.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const double dt = 1e-3;
    double matrix_vs_comp = 0.0, matrix_vs_scalar = 0.0, three_level = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto thermal = two_state_thermal_model(rate(rng), rate(rng), split(rng), strength(rng));
        const auto rho = detail::random_density(2, rng, 0.5);
        const double dW = std::sqrt(dt) * g(rng);
        const auto a = em_step_matrix(thermal.to_belavkin(), rho, dt, dW);
        const auto b = componentwise_step(thermal, rho, dt, dW);
        const double q = em_step(reduce_two_state(thermal).params, rho(0, 0).real(), dt, dW);
        matrix_vs_comp = std::max(matrix_vs_comp, (a.matrix() - b.matrix()).cwiseAbs().maxCoeff());
        matrix_vs_scalar = std::max(matrix_vs_scalar, std::abs(a(0, 0).real() - q));

        const auto t3 = detail::random_thermal_model(3, rng, strength(rng));
        const auto r3 = detail::random_density(3, rng, 0.5);
        const double dW3 = std::sqrt(dt) * g(rng);
        three_level = std::max(three_level, (em_step_matrix(t3.to_belavkin(), r3, dt, dW3).matrix() -
                                             componentwise_step(t3, r3, dt, dW3).matrix())
                                                .cwiseAbs()
                                                .maxCoeff());
    }
    r.measured = {{"matrix_vs_componentwise", matrix_vs_comp},
                  {"matrix_vs_scalar", matrix_vs_scalar},
                  {"matrix_vs_componentwise_n3", three_level}};
    r.detail = "1e3 random two-level steps and 1e3 three-level steps";
    detail::finish(r, matrix_vs_comp < 1e-12 && matrix_vs_scalar < 1e-12 && three_level < 1e-12, sw);
    return r;
}

/// 3. Jump rates read off smoothed finite-gamma paths, 20 seeds.
inline CriterionResult criterion_3(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{3, "jump_rate_recovery", false, {}, "", 0.0, 300.0};
    const TwoStateParams params{cfg.lambda, cfg.p, 400.0};
    const double T = 200.0, dt = 1e-5;
    const double w01 = cfg.lambda * cfg.p, w10 = cfg.lambda * (1.0 - cfg.p);
    constexpr std::size_t kSeeds = 20;
    std::vector<double> e01(kSeeds, 0.0), e10(kSeeds, 0.0);
    std::vector<int> ok(kSeeds, 0);

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t s; (s = next.fetch_add(1)) < kSeeds;) {
            SimulateOptions options;
            options.stride = 10;
            options.trajectory = s;
            const auto path = simulate(params, cfg.p, dt, T, cfg.seed, options);
            const auto est = estimate_jump_rates(smooth(path, T / 1000.0), 0.2);
            if (!est) continue;
            e01[s] = est->w01_hat;
            e10[s] = est->w10_hat;
            ok[s] = std::abs(est->w01_hat / w01 - 1.0) <= 0.15 && std::abs(est->w10_hat / w10 - 1.0) <= 0.15;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::max(1u, cfg.workers); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    const int passes = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    double m01 = 0.0, m10 = 0.0;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        m01 += e01[s] / kSeeds;
        m10 += e10[s] / kSeeds;
    }
    r.measured = {{"seeds_passing", static_cast<double>(passes)}, {"mean_w01_hat", m01}, {"mean_w10_hat", m10}};
    r.detail = "w01_hat per seed " + detail::join(e01) + "; w10_hat per seed " + detail::join(e10);
    detail::finish(r, passes >= 16, sw);
    return r;
}

/// Everything measured on the one fixed beta path, per gamma.
struct FixedBetaStudy {
    double horizon = 0.0;        // H used for occupation and graphs
    double clock_reached = 0.0;  // C_L
    std::size_t limit_jumps = 0;
    double occupation_limit = 0.0;
    std::vector<double> gammas, tinv_reached, clock_sup_error, occupation_error, hausdorff;
    double seconds = 0.0;
};

inline FixedBetaStudy run_fixed_beta_study(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    FixedBetaStudy st;
    st.gammas = cfg.gammas;
    const auto beta = sample_brownian(cfg.beta_x0, cfg.beta_dt, cfg.beta_L, cfg.seed);
    const auto mc = mixed_local_time_clock(beta, cfg.lambda, cfg.p);
    st.clock_reached = mc.reached();

    auto scale_for = [&](double g) { return ScaleFunction({cfg.lambda, cfg.p, g}, cfg.beta_x0); };
    for (double g : st.gammas) {
        const auto tc = time_change_inverse(beta, scale_for(g));
        double sup = 0.0;
        for (std::size_t k = 0; k < tc.tinv.size(); ++k) sup = std::max(sup, std::abs(tc.tinv[k] - mc.clock[k]));
        st.tinv_reached.push_back(tc.reached());
        st.clock_sup_error.push_back(sup);
    }

    const double H = 0.9 * std::min(st.clock_reached, *std::min_element(st.tinv_reached.begin(), st.tinv_reached.end()));
    st.horizon = H;
    const PathFunctional f = [H](double t, double x) { return detail::time_bump(t, H) * x; };
    const auto chain = mc.chain(H);
    st.limit_jumps = chain.jump_times.size();
    st.occupation_limit = occupation_functional(chain, f);
    const auto limit = limit_graph(beta, mc, H, cfg.graph_delta);

    for (double g : st.gammas) {
        const auto h = scale_for(g);
        const auto tc = time_change_inverse(beta, h);
        OccupationAccumulator acc(f);
        ColumnBuilder builder(H, cfg.graph_delta);
        bool first = true;
        double t_prev = 0.0, q_prev = 0.0;
        for_each_coupled_sample(beta, tc, h, H, [&](double t, double q) {
            acc(t, q);
            if (first) builder.add_point(t, q);
            else builder.add_segment(t_prev, q_prev, t, q);
            first = false;
            t_prev = t;
            q_prev = q;
        });
        st.occupation_error.push_back(std::abs(acc.value() - st.occupation_limit));
        st.hausdorff.push_back(hausdorff(builder.finish(), limit));
    }
    st.seconds = sw.seconds();
    return st;
}

/// 4. Occupation functional of q^gamma against that of Q.
inline CriterionResult criterion_4(const FixedBetaStudy& st) {
    detail::Stopwatch sw;
    CriterionResult r{4, "occupation_convergence", false, {}, "", 0.0, 600.0};
    const double last = st.occupation_error.back(), bound = 0.05 * st.horizon;
    r.measured = {{"horizon", st.horizon}, {"limit_value", st.occupation_limit}, {"final_error", last},
                  {"bound", bound}};
    r.detail = "errors over gammas " + detail::join(st.gammas) + ": " + detail::join(st.occupation_error);
    const bool ok = detail::strictly_decreasing(st.occupation_error) && last < bound;
    detail::finish(r, ok, sw);
    r.seconds += st.seconds;
    r.passed = ok && r.seconds < r.time_limit;
    return r;
}

/// 5. Hausdorff distance between the graph of q^gamma and the limit graph.
inline CriterionResult criterion_5(const FixedBetaStudy& st) {
    detail::Stopwatch sw;
    CriterionResult r{5, "hausdorff_convergence", false, {}, "", 0.0, 600.0};
    const double last = st.hausdorff.back();
    r.measured = {{"horizon", st.horizon}, {"final_distance", last}};
    r.detail = "distances over gammas " + detail::join(st.gammas) + ": " + detail::join(st.hausdorff);
    const bool ok = detail::strictly_decreasing(st.hausdorff) && last < 0.05;
    detail::finish(r, ok, sw);
    r.seconds += st.seconds;
    r.passed = ok && r.seconds < r.time_limit;
    return r;
}

/// 6. phi_gamma tested against bumps at 0 and 1.
inline CriterionResult criterion_6(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{6, "phi_weak_limit", false, {}, "", 0.0, 60.0};
    const double width = 0.05;
    auto bump = [width](double c) {
        return [c, width](double y) { return std::exp(-0.5 * (y - c) * (y - c) / (width * width)); };
    };
    const double target0 = 1.0 / (2.0 * cfg.lambda * cfg.p), target1 = 1.0 / (2.0 * cfg.lambda * (1.0 - cfg.p));
    std::vector<double> err0, err1;
    for (double g : cfg.gammas) {
        const ScaleFunction h({cfg.lambda, cfg.p, g}, 0.5);
        err0.push_back(std::abs(h.integrate_against_phi(bump(0.0)) / target0 - 1.0));
        err1.push_back(std::abs(h.integrate_against_phi(bump(1.0)) / target1 - 1.0));
    }
    r.measured = {{"final_rel_error_0", err0.back()}, {"final_rel_error_1", err1.back()}};
    r.detail = "relative errors at 0 " + detail::join(err0) + ", at 1 " + detail::join(err1);
    detail::finish(r,
                   detail::strictly_decreasing(err0) && detail::strictly_decreasing(err1) && err0.back() < 0.05 &&
                       err1.back() < 0.05,
                   sw);
    return r;
}

/// 7. Uniform distance between T^{-1} and the mixed local-time clock.
inline CriterionResult criterion_7(const FixedBetaStudy& st) {
    detail::Stopwatch sw;
    CriterionResult r{7, "time_change_limit", false, {}, "", 0.0, 300.0};
    const double last = st.clock_sup_error.back(), bound = 0.05 * st.tinv_reached.back();
    r.measured = {{"clock_reached", st.clock_reached}, {"final_sup_error", last}, {"bound", bound}};
    r.detail = "sup errors over gammas " + detail::join(st.gammas) + ": " + detail::join(st.clock_sup_error) +
               "; T^-1_L " + detail::join(st.tinv_reached);
    const bool ok = detail::strictly_decreasing(st.clock_sup_error) && last < bound;
    detail::finish(r, ok, sw);
    r.seconds += st.seconds;
    r.passed = ok && r.seconds < r.time_limit;
    return r;
}

/// 8. Spike maxima law and exceedance counts.
inline CriterionResult criterion_8(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{8, "spike_maxima_law", false, {}, "", 0.0, 30.0};
    const double S = 40.0;
    const auto chain = sample_Q(cfg.lambda, cfg.p, 0.0, S, cfg.seed, 8);
    const auto spikes = sample_spikes(cfg.lambda, cfg.p, chain, cfg.m_min, cfg.seed, 9);
    std::vector<double> maxima;
    maxima.reserve(spikes.size());
    for (const auto& e : spikes.events) maxima.push_back(e.m);
    const double m_min = cfg.m_min;
    const double ks = ks_statistic(maxima, [m_min](double m) {
        if (m <= m_min) return 0.0;
        return std::min(1.0, 1.0 - (1.0 / m - 1.0) / (1.0 / m_min - 1.0));
    });
    bool counts_ok = true;
    double worst = 0.0;
    for (double m : {0.1, 0.3, 0.5}) {
        const auto c = count_spikes(spikes, chain, m);
        const double e0 = cfg.lambda * cfg.p * c.time0 * (1.0 / m - 1.0);
        const double e1 = cfg.lambda * (1.0 - cfg.p) * c.time1 * (1.0 / m - 1.0);
        const double z0 = (static_cast<double>(c.up) - e0) / std::sqrt(e0);
        const double z1 = (static_cast<double>(c.down) - e1) / std::sqrt(e1);
        worst = std::max({worst, std::abs(z0), std::abs(z1)});
        counts_ok &= std::abs(z0) <= 3.0 && std::abs(z1) <= 3.0;
    }
    r.measured = {{"spikes", static_cast<double>(spikes.size())}, {"ks", ks}, {"worst_count_z", worst}};
    r.detail = "maxima KS and counts above m in {0.1, 0.3, 0.5}";
    detail::finish(r, spikes.size() >= 10000 && ks < 0.02 && counts_ok, sw);
    return r;
}

/// 9. Law of the spike at time zero.
inline CriterionResult criterion_9(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{9, "first_spike_law", false, {}, "", 0.0, 30.0};
    const double x = 0.4;
    const int n = 10000;
    CounterRng rng = make_stream(cfg.seed, 9);
    std::vector<double> upper, lower;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_first_spike(x, rng);
        if (s.up_to_one) upper.push_back(s.lo);
        else lower.push_back(s.hi);
    }
    const double freq = static_cast<double>(upper.size()) / n;
    const double sigma = std::sqrt(x * (1.0 - x) / n);
    // Conditional CDFs: y in (0, x) with density prop. to (1-y)^-2, y in (x, 1) prop. to y^-2.
    const double ks_upper = ks_statistic(upper, [x](double y) {
        return y <= 0.0 ? 0.0 : y >= x ? 1.0 : (1.0 - x) * y / (x * (1.0 - y));
    });
    const double ks_lower = ks_statistic(lower, [x](double y) {
        return y <= x ? 0.0 : y >= 1.0 ? 1.0 : (1.0 - x / y) / (1.0 - x);
    });
    r.measured = {{"case_frequency", freq}, {"z", (freq - x) / sigma}, {"ks_upper_case", ks_upper},
                  {"ks_lower_case", ks_lower}};
    r.detail = "x0 = 0.4, 1e4 draws";
    detail::finish(r, std::abs(freq - x) <= 3.0 * sigma && ks_upper < 0.02 && ks_lower < 0.02, sw);
    return r;
}

/// 10. Mean holding times of the exact chain and of the beta-driven clock.
inline CriterionResult criterion_10(const ValidationConfig& cfg = {}) {
    detail::Stopwatch sw;
    CriterionResult r{10, "holding_time_law", false, {}, "", 0.0, 120.0};
    const double m0 = 1.0 / (cfg.lambda * cfg.p), m1 = 1.0 / (cfg.lambda * (1.0 - cfg.p));
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    const double H = 1e4 * 0.5 * (m0 + m1);  // about 1e4 jumps
    const auto chain = sample_Q(cfg.lambda, cfg.p, 0.0, H, cfg.seed, 10);
    const double q0 = mean(chain.holding_times(0)) / m0 - 1.0, q1 = mean(chain.holding_times(1)) / m1 - 1.0;

    double c0 = 0.0, c1 = 0.0;
    std::size_t clock_jumps = 0;
    {
        const auto beta = sample_brownian(0.0, 1e-4, 1e4, cfg.seed, 11);
        const auto mc = mixed_local_time_clock(beta, cfg.lambda, cfg.p, {1e-2, ClockBoundary::Reflected});
        const auto jc = mc.chain(mc.reached());
        clock_jumps = jc.jump_times.size();
        c0 = mean(jc.holding_times(0)) / m0 - 1.0;
        c1 = mean(jc.holding_times(1)) / m1 - 1.0;
    }
    r.measured = {{"chain_jumps", static_cast<double>(chain.jump_times.size())},
                  {"chain_rel_error_0", q0},
                  {"chain_rel_error_1", q1},
                  {"clock_jumps", static_cast<double>(clock_jumps)},
                  {"clock_rel_error_0", c0},
                  {"clock_rel_error_1", c1}};
    r.detail = "exact chain within 5%, reflected clock (L = 1e4, dt = 1e-4, eps = 1e-2) within 10%";
    detail::finish(r, std::abs(q0) < 0.05 && std::abs(q1) < 0.05 && std::abs(c0) < 0.1 && std::abs(c1) < 0.1, sw);
    return r;
}

/// Runs the criteria whose ids are in `ids` (all when empty), in order.
inline std::vector<CriterionResult> run_validation(const ValidationConfig& cfg, std::vector<int> ids = {},
                                                   const std::function<void(const CriterionResult&)>& report = {}) {
    if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<CriterionResult> out;
    FixedBetaStudy study;
    bool have_study = false;
    for (int id : ids) {
        if ((id == 4 || id == 5 || id == 7) && !have_study) {
            study = run_fixed_beta_study(cfg);
            have_study = true;
        }
        CriterionResult r;
        switch (id) {
            case 1: r = criterion_1(cfg); break;
            case 2: r = criterion_2(cfg); break;
            case 3: r = criterion_3(cfg); break;
            case 4: r = criterion_4(study); break;
            case 5: r = criterion_5(study); break;
            case 6: r = criterion_6(cfg); break;
            case 7: r = criterion_7(study); break;
            case 8: r = criterion_8(cfg); break;
            case 9: r = criterion_9(cfg); break;
            case 10: r = criterion_10(cfg); break;
            default: throw InvalidArgument("unknown criterion id " + std::to_string(id));
        }
        if (report) report(r);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace strongnoise
