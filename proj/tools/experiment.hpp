#pragma once

// Experiment orchestration behind the command-line tool: a flat key/value
// configuration per mode, CSV outputs, and a manifest.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "strongnoise/belavkin.hpp"
#include "strongnoise/graph_metric.hpp"
#include "strongnoise/scale_time.hpp"
#include "strongnoise/spike_limit.hpp"
#include "strongnoise/stats.hpp"
#include "strongnoise/twostate.hpp"
#include "strongnoise/validation.hpp"

namespace strongnoise::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& modes() {
    static const std::vector<std::string> m{"belavkin",     "twostate", "coupled-sweep",
                                            "limit-sample", "validate", "hausdorff-sweep"};
    return m;
}

/// Every key a mode may read; flags and config-file entries share these names.
inline const std::vector<std::string>& parameter_keys() {
    static const std::vector<std::string> k{
        "lambda", "p",        "gamma",    "gammas", "q0",       "x0",       "coherence",    "dt",
        "T",      "stride",   "L",        "dt_eff", "delta",    "m_min",    "H",            "epsilon",
        "boundary", "lambda_plus", "lambda_minus", "w", "trajectories", "criteria"};
    return k;
}

struct ExperimentConfig {
    std::string mode;
    std::map<std::string, std::string> params;
    std::uint64_t seed = kDefaultSeed;
    std::filesystem::path output_dir = "out";
    unsigned workers = 1;
};

struct RunResult {
    std::vector<std::string> files;  // relative to output_dir
    json summary;
    json manifest;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string full_precision(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

struct Range {
    double lo, hi;
    bool lo_open, hi_open;

    bool contains(double x) const {
        return (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    }
    std::string text() const {
        auto bound = [](double v) { return std::isinf(v) ? std::string(v < 0 ? "-inf" : "inf") : full_precision(v); };
        return std::string(lo_open ? "(" : "[") + bound(lo) + ", " + bound(hi) + (hi_open ? ")" : "]");
    }
};

constexpr double kInf = std::numeric_limits<double>::infinity();
inline const Range kPositive{0.0, kInf, true, true};
inline const Range kNonNegative{0.0, kInf, false, true};
inline const Range kOpenUnit{0.0, 1.0, true, true};
inline const Range kClosedUnit{0.0, 1.0, false, false};
inline const Range kCount{1.0, 1e9, false, false};

/// Typed, range-checked reads from the flat map. Every value read is recorded
/// in canonical form, so the manifest shows the fully resolved configuration.
class Params {
public:
    Params(const std::map<std::string, std::string>& raw, std::string mode) : raw_(raw), mode_(std::move(mode)) {}

    double number(const std::string& key, double fallback, const Range& range) {
        double v = fallback;
        if (auto it = raw_.find(key); it != raw_.end()) v = parse(key, it->second);
        check(key, v, range);
        resolved_[key] = full_precision(v);
        return v;
    }

    std::size_t count(const std::string& key, std::size_t fallback, const Range& range = kCount) {
        const double v = number(key, static_cast<double>(fallback), range);
        if (v != std::floor(v)) fail(key, "expected an integer, got " + full_precision(v));
        return static_cast<std::size_t>(v);
    }

    std::vector<double> list(const std::string& key, const std::vector<double>& fallback, const Range& range) {
        std::vector<double> out = fallback;
        if (auto it = raw_.find(key); it != raw_.end()) {
            out.clear();
            std::string text = it->second;
            std::replace(text.begin(), text.end(), ';', ',');
            std::stringstream ss(text);
            for (std::string item; std::getline(ss, item, ',');) {
                item.erase(0, item.find_first_not_of(" []"));
                item.erase(item.find_last_not_of(" []") + 1);
                if (!item.empty()) out.push_back(parse(key, item));
            }
            if (out.empty()) fail(key, "expected a non-empty comma-separated list");
        }
        std::string canon;
        for (double v : out) {
            check(key, v, range);
            canon += (canon.empty() ? "" : ",") + full_precision(v);
        }
        resolved_[key] = canon;
        return out;
    }

    std::string choice(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
        std::string v = fallback;
        if (auto it = raw_.find(key); it != raw_.end()) v = it->second;
        if (!allowed.count(v)) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            fail(key, "expected one of {" + opts + "}, got '" + v + "'");
        }
        resolved_[key] = v;
        return v;
    }

    const std::map<std::string, std::string>& resolved() const { return resolved_; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw InvalidArgument("mode " + mode_ + ", key '" + key + "': " + what);
    }

private:
    double parse(const std::string& key, const std::string& text) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            fail(key, "expected a number, got '" + text + "'");
        }
    }
    void check(const std::string& key, double v, const Range& range) const {
        if (!std::isfinite(v) || !range.contains(v))
            fail(key, "value " + full_precision(v) + " outside " + range.text());
    }

    const std::map<std::string, std::string>& raw_;
    std::string mode_;
    std::map<std::string, std::string> resolved_;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header) : file_(std::fopen(path.c_str(), "wb")) {
        if (!file_) throw Error("cannot open " + path.string() + " for writing");
        std::fputs(header.c_str(), file_.get());
        std::fputc('\n', file_.get());
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) std::fputc(',', file_.get());
            std::fprintf(file_.get(), "%.17g", v);
            first = false;
        }
        std::fputc('\n', file_.get());
    }

private:
    struct Closer {
        void operator()(std::FILE* f) const { std::fclose(f); }
    };
    std::unique_ptr<std::FILE, Closer> file_;
};

/// Runs fn(i) for i < n on `workers` threads. Results must not depend on order.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::max(1u, workers) && w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct Context {
    const ExperimentConfig& cfg;
    Params& params;
    std::vector<std::string>& files;
    json& summary;

    std::filesystem::path file(const std::string& name) {
        files.push_back(name);
        return cfg.output_dir / name;
    }
};

inline std::string indexed(const std::string& stem, std::size_t i) { return stem + "_" + std::to_string(i) + ".csv"; }

inline void run_belavkin(Context& ctx) {
    auto& P = ctx.params;
    const double lp = P.number("lambda_plus", 0.3, kNonNegative), lm = P.number("lambda_minus", 0.7, kNonNegative);
    const double w = P.number("w", 1.0, {-kInf, kInf, true, true}), gamma = P.number("gamma", 10.0, kNonNegative);
    const double q0 = P.number("q0", 0.5, kClosedUnit), c = P.number("coherence", 0.0, {-0.5, 0.5, false, false});
    const double dt = P.number("dt", 1e-3, kPositive), T = P.number("T", 10.0, kNonNegative);
    const std::size_t stride = P.count("stride", 1), n = P.count("trajectories", 1);
    if (c * c > q0 * (1.0 - q0) + 1e-15) P.fail("coherence", "|coherence|^2 must not exceed q0 (1 - q0)");

    const auto model = two_state_thermal_model(lp, lm, w, gamma).to_belavkin();
    CMatrix m(2, 2);
    m << q0, c, c, 1.0 - q0;
    const auto rho0 = DensityMatrix::from_matrix(m);
    std::vector<std::string> names(n);
    std::vector<double> drift(n), bloch(n, -kInf);
    parallel_for(n, ctx.cfg.workers, [&](std::size_t i) {
        BelavkinOptions options;
        options.stride = stride;
        options.trajectory = i;
        const auto traj = simulate_belavkin(model, rho0, dt, T, ctx.cfg.seed, options);
        CsvWriter csv(ctx.cfg.output_dir / indexed("belavkin", i), "t,q,re_r,im_r,bloch_excess");
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
            const auto& s = traj.states[k];
            bloch[i] = std::max(bloch[i], bloch_excess(s));
            csv.row({traj.times[k], s(0, 0).real(), s(1, 0).real(), s(1, 0).imag(), bloch_excess(s)});
        }
        drift[i] = traj.max_trace_drift;
    });
    for (std::size_t i = 0; i < n; ++i) ctx.files.push_back(indexed("belavkin", i));
    ctx.summary["max_trace_drift"] = *std::max_element(drift.begin(), drift.end());
    ctx.summary["max_bloch_excess"] = *std::max_element(bloch.begin(), bloch.end());
}

inline void run_twostate(Context& ctx) {
    auto& P = ctx.params;
    const TwoStateParams params{P.number("lambda", 1.0, kNonNegative), P.number("p", 0.3, kOpenUnit),
                                P.number("gamma", 400.0, kNonNegative)};
    const double q0 = P.number("q0", 0.3, kClosedUnit), dt = P.number("dt", 1e-5, kPositive);
    const double T = P.number("T", 10.0, kNonNegative);
    const std::size_t stride = P.count("stride", 10), n = P.count("trajectories", 1);

    std::vector<std::size_t> clamps(n);
    std::vector<json> rates(n);
    parallel_for(n, ctx.cfg.workers, [&](std::size_t i) {
        SimulateOptions options;
        options.stride = stride;
        options.trajectory = i;
        StepStats stats;
        const auto path = simulate(params, q0, dt, T, ctx.cfg.seed, options, &stats);
        CsvWriter csv(ctx.cfg.output_dir / indexed("twostate", i), "t,q");
        for (std::size_t k = 0; k < path.size(); ++k) csv.row({path.times[k], path.values[k]});
        clamps[i] = stats.clamps;
        if (T > 0.0)
            if (const auto est = estimate_jump_rates(smooth(path, T / 1000.0)))
                rates[i] = {{"w01_hat", est->w01_hat}, {"w10_hat", est->w10_hat}, {"n01", est->n01},
                            {"n10", est->n10}};
    });
    for (std::size_t i = 0; i < n; ++i) ctx.files.push_back(indexed("twostate", i));
    ctx.summary["clamps"] = clamps;
    ctx.summary["jump_rates"] = rates;
}

inline ClockOptions clock_options(Params& P) {
    ClockOptions options;
    options.epsilon = P.number("epsilon", 0.0, kNonNegative);
    options.boundary = P.choice("boundary", "free", {"free", "reflected"}) == "free" ? ClockBoundary::Free
                                                                                     : ClockBoundary::Reflected;
    return options;
}

/// One beta, its mixed clock, and each gamma's time change; H defaults to 0.9
/// of the smallest reach.
struct SweepSetup {
    BrownianPath beta;
    MixedClock clock;
    std::vector<double> tinv_reached, clock_sup_error;
    double H = 0.0;
};

inline SweepSetup sweep_setup(double lambda, double p, double x0, double L, double dt_eff, const ClockOptions& opts,
                              const std::vector<double>& gammas, double H_user, std::uint64_t seed,
                              std::uint64_t trajectory) {
    SweepSetup s;
    s.beta = sample_brownian(x0, dt_eff, L, seed, trajectory);
    s.clock = mixed_local_time_clock(s.beta, lambda, p, opts);
    for (double g : gammas) {
        const auto tc = time_change_inverse(s.beta, ScaleFunction({lambda, p, g}, x0));
        double sup = 0.0;
        for (std::size_t k = 0; k < tc.tinv.size(); ++k) sup = std::max(sup, std::abs(tc.tinv[k] - s.clock.clock[k]));
        s.tinv_reached.push_back(tc.reached());
        s.clock_sup_error.push_back(sup);
    }
    const double reach = std::min(s.clock.reached(), *std::min_element(s.tinv_reached.begin(), s.tinv_reached.end()));
    s.H = H_user > 0.0 ? H_user : 0.9 * reach;
    if (s.clock.initial_state < 0 || !(s.H > 0.0))
        throw HorizonExhausted(s.H, s.clock.initial_state < 0 ? 0.0 : reach);
    if (s.H > reach) throw HorizonExhausted(s.H, reach);
    return s;
}

/// Streams the coupled path for one gamma into graph columns; `sample` sees every point.
inline PlanarSet coupled_columns(const SweepSetup& s, const ScaleFunction& h, double delta,
                                 const std::function<void(double, double)>& sample = {}) {
    const auto tc = time_change_inverse(s.beta, h);
    ColumnBuilder builder(s.H, delta);
    bool first = true;
    double t_prev = 0.0, q_prev = 0.0;
    for_each_coupled_sample(s.beta, tc, h, s.H, [&](double t, double q) {
        if (first) builder.add_point(t, q);
        else builder.add_segment(t_prev, q_prev, t, q);
        if (sample) sample(t, q);
        first = false;
        t_prev = t;
        q_prev = q;
    });
    return builder.finish();
}

inline void run_coupled_sweep(Context& ctx) {
    auto& P = ctx.params;
    const double lambda = P.number("lambda", 1.0, kPositive), p = P.number("p", 0.3, kOpenUnit);
    const auto gammas = P.list("gammas", {1e2, 1e3, 1e4}, kPositive);
    const double x0 = P.number("x0", 0.3, kOpenUnit), L = P.number("L", 50.0, kPositive);
    const double dt_eff = P.number("dt_eff", 1e-6, kPositive), delta = P.number("delta", 1e-3, {0.0, 1.0, true, false});
    const double H_user = P.number("H", 0.0, kNonNegative);
    const std::size_t stride = P.count("stride", 1000);
    const auto opts = clock_options(P);

    const auto s = sweep_setup(lambda, p, x0, L, dt_eff, opts, gammas, H_user, ctx.cfg.seed, 0);
    const auto limit = limit_graph(s.beta, s.clock, s.H, delta);
    {
        CsvWriter csv(ctx.file("limit_graph.csv"), "t,lo,hi");
        for (const auto& c : limit.columns) csv.row({c.t, c.lo, c.hi});
        const auto chain = s.clock.chain(s.H);
        CsvWriter jumps(ctx.file("limit_chain.csv"), "t,state");
        jumps.row({0.0, static_cast<double>(chain.initial_state)});
        for (std::size_t j = 0; j < chain.jump_times.size(); ++j)
            jumps.row({chain.jump_times[j], static_cast<double>(chain.states[j])});
    }
    CsvWriter table(ctx.file("hausdorff.csv"), "gamma,tinv_reached,clock_sup_error,hausdorff");
    json rows = json::array();
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        const ScaleFunction h({lambda, p, gammas[g]}, x0);
        CsvWriter path(ctx.file(indexed("coupled", g)), "t,q");
        std::size_t k = 0;
        double t_last = 0.0, q_last = 0.0;
        const auto graph = coupled_columns(s, h, delta, [&](double t, double q) {
            if (k++ % stride == 0) path.row({t, q});
            t_last = t;
            q_last = q;
        });
        if ((k - 1) % stride != 0) path.row({t_last, q_last});
        const double d = hausdorff(graph, limit);
        table.row({gammas[g], s.tinv_reached[g], s.clock_sup_error[g], d});
        rows.push_back({{"gamma", gammas[g]}, {"hausdorff", d}, {"clock_sup_error", s.clock_sup_error[g]}});
    }
    ctx.summary["horizon"] = s.H;
    ctx.summary["clock_reached"] = s.clock.reached();
    ctx.summary["sweep"] = rows;
}

inline void run_hausdorff_sweep(Context& ctx) {
    auto& P = ctx.params;
    const double lambda = P.number("lambda", 1.0, kPositive), p = P.number("p", 0.3, kOpenUnit);
    const auto gammas = P.list("gammas", {1e2, 1e3, 1e4}, kPositive);
    const double x0 = P.number("x0", 0.3, kOpenUnit), L = P.number("L", 5.0, kPositive);
    const double dt_eff = P.number("dt_eff", 1e-5, kPositive), delta = P.number("delta", 1e-3, {0.0, 1.0, true, false});
    const std::size_t n = P.count("trajectories", 4);
    const auto opts = clock_options(P);

    std::vector<double> horizon(n);
    std::vector<std::vector<double>> dist(n);
    parallel_for(n, ctx.cfg.workers, [&](std::size_t i) {
        const auto s = sweep_setup(lambda, p, x0, L, dt_eff, opts, gammas, 0.0, ctx.cfg.seed, i);
        const auto limit = limit_graph(s.beta, s.clock, s.H, delta);
        horizon[i] = s.H;
        for (double g : gammas) dist[i].push_back(hausdorff(coupled_columns(s, ScaleFunction({lambda, p, g}, x0), delta), limit));
    });
    CsvWriter table(ctx.file("hausdorff_sweep.csv"), "trajectory,gamma,horizon,hausdorff");
    std::vector<double> mean(gammas.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            table.row({static_cast<double>(i), gammas[g], horizon[i], dist[i][g]});
            mean[g] += dist[i][g] / static_cast<double>(n);
        }
    ctx.summary["mean_hausdorff"] = mean;
}

inline void run_limit_sample(Context& ctx) {
    auto& P = ctx.params;
    const double lambda = P.number("lambda", 1.0, kPositive), p = P.number("p", 0.3, kOpenUnit);
    const double x0 = P.number("x0", 0.3, kClosedUnit), H = P.number("H", 10.0, kPositive);
    const double m_min = P.number("m_min", 1e-3, kOpenUnit);
    const std::size_t n = P.count("trajectories", 1);

    std::vector<std::size_t> jumps(n), spikes(n);
    parallel_for(n, ctx.cfg.workers, [&](std::size_t i) {
        const auto s = sample_limit_process(lambda, p, x0, H, m_min, ctx.cfg.seed, i);
        CsvWriter chain(ctx.cfg.output_dir / indexed("limit_chain", i), "t,state");
        chain.row({0.0, static_cast<double>(s.chain.initial_state)});
        for (std::size_t j = 0; j < s.chain.jump_times.size(); ++j)
            chain.row({s.chain.jump_times[j], static_cast<double>(s.chain.states[j])});
        CsvWriter sp(ctx.cfg.output_dir / indexed("limit_spikes", i), "t,state,lo,hi");
        sp.row({0.0, static_cast<double>(s.first.state()), s.first.lo, s.first.hi});
        for (const auto& e : s.spikes.events) sp.row({e.t, static_cast<double>(e.state), e.lo(), e.hi()});
        jumps[i] = s.chain.jump_times.size();
        spikes[i] = s.spikes.size();
    });
    for (std::size_t i = 0; i < n; ++i) {
        ctx.files.push_back(indexed("limit_chain", i));
        ctx.files.push_back(indexed("limit_spikes", i));
    }
    ctx.summary["jumps"] = jumps;
    ctx.summary["spikes"] = spikes;
}

inline json to_json(const CriterionResult& r) {
    json measured = json::object();
    for (const auto& [k, v] : r.measured) measured[k] = v;
    return {{"id", r.id},           {"name", r.name},       {"passed", r.passed},
            {"measured", measured}, {"detail", r.detail},   {"seconds", r.seconds},
            {"time_limit", r.time_limit}};
}

inline void run_validate(Context& ctx, const std::function<void(const CriterionResult&)>& progress) {
    auto& P = ctx.params;
    ValidationConfig vc;
    vc.seed = ctx.cfg.seed;
    vc.workers = ctx.cfg.workers;
    vc.lambda = P.number("lambda", 1.0, kPositive);
    vc.p = P.number("p", 0.3, kOpenUnit);
    std::vector<int> ids;
    for (double v : P.list("criteria", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1.0, 10.0, false, false})) {
        if (v != std::floor(v)) P.fail("criteria", "criterion ids are integers 1..10");
        ids.push_back(static_cast<int>(v));
    }
    json results = json::array();
    int passed = 0;
    for (const auto& r : run_validation(vc, ids, progress)) {
        results.push_back(to_json(r));
        passed += r.passed;
    }
    ctx.summary["passed"] = passed;
    ctx.summary["total"] = results.size();
    ctx.summary["criteria"] = results;
    std::ofstream(ctx.file("validation.json")) << ctx.summary.dump(2) << '\n';
}

}  // namespace detail

/// Canonical text hashed into the manifest: mode, seed, then sorted key=value.
inline std::string canonical_config(const std::string& mode, std::uint64_t seed,
                                    const std::map<std::string, std::string>& resolved) {
    std::string text = "mode=" + mode + "\nseed=" + std::to_string(seed) + "\n";
    for (const auto& [k, v] : resolved) text += k + "=" + v + "\n";
    return text;
}

/// Runs one experiment, writes its files and manifest.json into output_dir.
inline RunResult run(const ExperimentConfig& cfg, const std::function<void(const CriterionResult&)>& progress = {}) {
    if (std::find(modes().begin(), modes().end(), cfg.mode) == modes().end())
        throw InvalidArgument("unknown mode '" + cfg.mode + "'");
    for (const auto& [k, v] : cfg.params)
        if (std::find(parameter_keys().begin(), parameter_keys().end(), k) == parameter_keys().end())
            throw InvalidArgument("unknown key '" + k + "'");
    std::filesystem::create_directories(cfg.output_dir);

    RunResult out;
    detail::Params params(cfg.params, cfg.mode);
    detail::Context ctx{cfg, params, out.files, out.summary};
    out.summary = json::object();
    if (cfg.mode == "belavkin") detail::run_belavkin(ctx);
    else if (cfg.mode == "twostate") detail::run_twostate(ctx);
    else if (cfg.mode == "coupled-sweep") detail::run_coupled_sweep(ctx);
    else if (cfg.mode == "hausdorff-sweep") detail::run_hausdorff_sweep(ctx);
    else if (cfg.mode == "limit-sample") detail::run_limit_sample(ctx);
    else detail::run_validate(ctx, progress);

    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical_config(cfg.mode, cfg.seed, params.resolved()))));
    json config = json::object();
    for (const auto& [k, v] : params.resolved()) config[k] = v;
    out.manifest = {{"mode", cfg.mode},   {"seed", cfg.seed},    {"config", config},
                    {"config_hash", std::string("fnv1a64:") + hash}, {"workers", cfg.workers},
                    {"files", out.files}, {"summary", out.summary}};
    std::ofstream(cfg.output_dir / "manifest.json") << out.manifest.dump(2) << '\n';
    return out;
}

}  // namespace strongnoise::cli
