#pragma once

// Hausdorff distance between closed subsets of [0,H] x [0,1], measured in the
// normalized box (t/H, y) with the Euclidean norm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "strongnoise/errors.hpp"
#include "strongnoise/twostate.hpp"

namespace strongnoise {

/// Vertical segment {t} x [lo, hi]; a point when lo == hi.
struct Column {
    double t = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct PlanarSet {
    double horizon = 1.0;  // H
    double delta = 1e-3;   // resolution in normalized units
    std::vector<Column> columns;

    PlanarSet() = default;
    PlanarSet(double H, double resolution) : horizon(H), delta(resolution) {
        if (!(H > 0.0)) throw InvalidArgument("PlanarSet: horizon must be > 0");
        if (!(resolution > 0.0)) throw InvalidArgument("PlanarSet: delta must be > 0");
    }

    bool empty() const noexcept { return columns.empty(); }
    std::size_t size() const noexcept { return columns.size(); }

    void add_point(double t, double y) { columns.push_back({t, y, y}); }
    void add_column(double t, double lo, double hi) { columns.push_back({t, std::min(lo, hi), std::max(lo, hi)}); }

    void sort() {
        std::stable_sort(columns.begin(), columns.end(), [](const Column& a, const Column& b) { return a.t < b.t; });
    }

    void validate() const {
        const double tol_t = delta * horizon;
        for (const auto& c : columns) {
            if (!(c.t >= -tol_t && c.t <= horizon + tol_t && c.lo >= -delta && c.hi <= 1.0 + delta && c.lo <= c.hi))
                throw InvalidArgument("PlanarSet: element outside [0,H]x[0,1]");
        }
    }
};

namespace detail {

/// Distance from (u, y) to the nearest column of `b` (sorted by t), normalized.
inline double distance_to_set(double u, double y, const std::vector<Column>& b, double inv_h) {
    const auto start = std::lower_bound(b.begin(), b.end(), u,
                                        [inv_h](const Column& c, double v) { return c.t * inv_h < v; });
    double best2 = std::numeric_limits<double>::infinity();
    auto visit = [&](const Column& c) {
        const double du = c.t * inv_h - u;
        const double dy = y < c.lo ? c.lo - y : (y > c.hi ? y - c.hi : 0.0);
        best2 = std::min(best2, du * du + dy * dy);
        return du * du;
    };
    for (auto it = start; it != b.end(); ++it)
        if (visit(*it) >= best2) break;
    for (auto it = start; it != b.begin();)
        if (visit(*--it) >= best2) break;
    return std::sqrt(best2);
}

/// sup over a in A of dist(a, B); A's columns are expanded on a delta grid in y.
inline double directed_hausdorff(const PlanarSet& a, const PlanarSet& b) {
    const double inv_ha = 1.0 / a.horizon, inv_hb = 1.0 / b.horizon;
    const double step = std::min(a.delta, b.delta);
    double worst = 0.0;
    for (const auto& c : a.columns) {
        const double u = c.t * inv_ha;
        const std::size_t n = static_cast<std::size_t>(std::ceil((c.hi - c.lo) / step));
        for (std::size_t i = 0; i <= n; ++i) {
            const double y = i == n ? c.hi : c.lo + static_cast<double>(i) * step;
            worst = std::max(worst, distance_to_set(u, y, b.columns, inv_hb));
        }
    }
    return worst;
}

}  // namespace detail

/// d_H(A, B) = max of the two directed distances. Inputs must be sorted by t.
inline double hausdorff(const PlanarSet& a, const PlanarSet& b) {
    if (a.empty() || b.empty()) throw InvalidArgument("hausdorff: empty set");
    return std::max(detail::directed_hausdorff(a, b), detail::directed_hausdorff(b, a));
}

/// Bins time into cells of width delta * H and records, per cell, the range of
/// y swept by the curve inside it. The connected curve fills that range, so
/// the resulting columns (at cell centers) are within delta/2 of the graph.
class ColumnBuilder {
public:
    ColumnBuilder(double H, double delta)
        : H_(H), delta_(delta), width_(delta * H),
          bins_(static_cast<std::size_t>(std::ceil(1.0 / delta - 1e-9))),
          lo_(bins_, std::numeric_limits<double>::infinity()),
          hi_(bins_, -std::numeric_limits<double>::infinity()) {
        if (!(H > 0.0) || !(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("ColumnBuilder: bad H or delta");
    }

    void add_point(double t, double y) {
        const std::size_t b = bin(t);
        lo_[b] = std::min(lo_[b], y);
        hi_[b] = std::max(hi_[b], y);
    }

    void add_vertical(double t, double y0, double y1) {
        add_point(t, y0);
        add_point(t, y1);
    }

    /// Straight segment (t0, y0) -> (t1, y1) with t0 <= t1.
    void add_segment(double t0, double y0, double t1, double y1) {
        const std::size_t b0 = bin(t0), b1 = bin(t1);
        add_point(t0, y0);
        add_point(t1, y1);
        if (b0 == b1) return;
        const double slope = (y1 - y0) / (t1 - t0);
        for (std::size_t b = b0 + 1; b <= b1; ++b) {
            const double edge = width_ * static_cast<double>(b);
            const double y = y0 + slope * (edge - t0);
            update(b - 1, y);
            update(b, y);
        }
    }

    PlanarSet finish() const {
        PlanarSet out(H_, delta_);
        for (std::size_t b = 0; b < bins_; ++b)
            if (lo_[b] <= hi_[b]) out.add_column(std::min(H_, (static_cast<double>(b) + 0.5) * width_), lo_[b], hi_[b]);
        return out;
    }

private:
    std::size_t bin(double t) const noexcept {
        const double r = std::floor(t / width_);
        if (!(r > 0.0)) return 0;
        return std::min(bins_ - 1, static_cast<std::size_t>(r));
    }
    void update(std::size_t b, double y) noexcept {
        lo_[b] = std::min(lo_[b], y);
        hi_[b] = std::max(hi_[b], y);
    }

    double H_, delta_, width_;
    std::size_t bins_;
    std::vector<double> lo_, hi_;
};

/// Graph of the linear interpolant of `path` on [0, H], resampled at spacing
/// delta along arc length in normalized coordinates.
inline PlanarSet graph_of(const Path& path, double delta, double H) {
    if (path.empty()) throw InvalidArgument("graph_of: empty path");
    PlanarSet out(H, delta);
    out.add_point(path.times[0], path.values[0]);
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double du = (path.times[i] - path.times[i - 1]) / H;
        const double dy = path.values[i] - path.values[i - 1];
        const double len = std::hypot(du, dy);
        const std::size_t n = static_cast<std::size_t>(std::ceil(len / delta));
        for (std::size_t j = 1; j <= n; ++j) {
            const double s = static_cast<double>(j) / static_cast<double>(n);
            out.add_point(path.times[i - 1] + s * (path.times[i] - path.times[i - 1]), path.values[i - 1] + s * dy);
        }
    }
    out.sort();
    return out;
}

/// Column form of the graph of `path`; suited to long or spiky paths.
inline PlanarSet graph_columns(const Path& path, double delta, double H) {
    if (path.empty()) throw InvalidArgument("graph_columns: empty path");
    ColumnBuilder builder(H, delta);
    builder.add_point(path.times[0], path.values[0]);
    for (std::size_t i = 1; i < path.size(); ++i)
        builder.add_segment(path.times[i - 1], path.values[i - 1], path.times[i], path.values[i]);
    return builder.finish();
}

}  // namespace strongnoise
