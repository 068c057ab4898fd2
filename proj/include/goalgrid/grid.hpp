#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "goalgrid/error.hpp"

namespace goalgrid {

/// Uniform wealth axis on [0, max].
struct AxisGrid {
    double min = 0.0;
    double max = 0.0;
    double step = 0.0;
    std::size_t count = 0;

    double coord(std::size_t i) const { return min + static_cast<double>(i) * step; }

    /// Index of the node closest to x, clamped to the axis.
    std::size_t nearest(double x) const {
        const double s = std::round((x - min) / step);
        if (!(s > 0.0)) return 0;
        const auto i = static_cast<std::size_t>(s);
        return i >= count ? count - 1 : i;
    }

    std::size_t last() const { return count - 1; }

    friend bool operator==(const AxisGrid&, const AxisGrid&) = default;
};

struct TimeLine {
    double start = 0.0;
    double end = 0.0;
    double step = 0.0;
    std::size_t count = 0;

    double time(std::size_t n) const {
        return n + 1 == count ? end : start + static_cast<double>(n) * step;
    }

    std::size_t nearest(double t) const {
        const double s = std::round((t - start) / step);
        if (!(s > 0.0)) return 0;
        const auto n = static_cast<std::size_t>(s);
        return n >= count ? count - 1 : n;
    }

    friend bool operator==(const TimeLine&, const TimeLine&) = default;
};

namespace detail {

/// Number of `step`s in `span`, or nullopt if span is not a multiple.
inline std::optional<std::size_t> whole_steps(double span, double step, double tol) {
    if (!(step > 0.0) || !(span >= 0.0)) return std::nullopt;
    const double q = span / step;
    const double n = std::round(q);
    if (std::abs(n * step - span) > tol * std::max(1.0, std::abs(span))) return std::nullopt;
    return static_cast<std::size_t>(n);
}

}  // namespace detail

inline AxisGrid make_axis(double x_max, double dx) {
    const auto n = detail::whole_steps(x_max, dx, 1e-9);
    if (!n || *n == 0) {
        throw Error(ErrorKind::NonconformingGrid,
                    "x_max=" + std::to_string(x_max) + " is not a positive multiple of dx=" +
                        std::to_string(dx),
                    "grid.dx");
    }
    return AxisGrid{0.0, static_cast<double>(*n) * dx, dx, *n + 1};
}

inline TimeLine make_timeline(double t_start, double t_end, double dt) {
    const auto n = detail::whole_steps(t_end - t_start, dt, 1e-12);
    if (!n || *n == 0) {
        throw Error(ErrorKind::NonconformingGrid,
                    "[" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                        "] is not a positive multiple of dt=" + std::to_string(dt),
                    "grid.dt");
    }
    return TimeLine{t_start, t_end, dt, *n + 1};
}

struct GridSpec {
    AxisGrid axis;
    TimeLine times;
};

/// Wealth axis covering [0, x_max] and time line covering [t_start, t_end],
/// both inclusive.
inline GridSpec build_grid(double x_max, double dx, double t_start, double t_end, double dt) {
    return GridSpec{make_axis(x_max, dx), make_timeline(t_start, t_end, dt)};
}

/// Geometry of one time slice: one axis (fundamental wealth) or two
/// (goal wealth x1, fundamental wealth x2). Cells are x1-major.
struct SliceShape {
    std::vector<AxisGrid> axes;

    std::size_t dims() const noexcept { return axes.size(); }

    std::size_t cells() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.count;
        return n;
    }

    std::size_t index(std::size_t i1) const { return i1; }
    std::size_t index(std::size_t i1, std::size_t i2) const { return i1 * axes[1].count + i2; }

    std::array<std::size_t, 2> multi(std::size_t cell) const {
        if (dims() == 1) return {cell, 0};
        return {cell / axes[1].count, cell % axes[1].count};
    }

    std::array<double, 2> coords(std::size_t cell) const {
        const auto m = multi(cell);
        if (dims() == 1) return {axes[0].coord(m[0]), 0.0};
        return {axes[0].coord(m[0]), axes[1].coord(m[1])};
    }

    /// Cell nearest to the given wealth coordinates.
    std::size_t nearest(double x1, double x2 = 0.0) const {
        if (dims() == 1) return axes[0].nearest(x1);
        return index(axes[0].nearest(x1), axes[1].nearest(x2));
    }

    friend bool operator==(const SliceShape&, const SliceShape&) = default;
};

/// Time-indexed samples of one period's value function.
struct ValueSurface {
    std::size_t period_index = 0;
    TimeLine times;
    SliceShape shape;
    std::vector<double> values;  // time-major

    ValueSurface() = default;
    ValueSurface(std::size_t period, TimeLine t, SliceShape s)
        : period_index(period), times(t), shape(std::move(s)),
          values(times.count * shape.cells(), 0.0) {}

    std::span<double> slice(std::size_t n) {
        return std::span<double>(values).subspan(n * shape.cells(), shape.cells());
    }
    std::span<const double> slice(std::size_t n) const {
        return std::span<const double>(values).subspan(n * shape.cells(), shape.cells());
    }

    double at(std::size_t n, std::size_t cell) const { return values[n * shape.cells() + cell]; }
};

/// A finite-difference functional: sum of weight * value over at most four cells.
struct DiffOp {
    struct Tap {
        std::size_t cell = 0;
        double weight = 0.0;
    };
    std::array<Tap, 7> taps{};
    std::size_t size = 0;

    void add(std::size_t cell, double w) {
        for (std::size_t k = 0; k < size; ++k) {
            if (taps[k].cell == cell) {
                taps[k].weight += w;
                return;
            }
        }
        taps[size++] = Tap{cell, w};
    }

    double apply(std::span<const double> v) const {
        double s = 0.0;
        for (std::size_t k = 0; k < size; ++k) s += taps[k].weight * v[taps[k].cell];
        return s;
    }
};

/// Difference operators at one cell, expressed as taps so the same weights
/// drive both argmin evaluation and linear-system assembly.
///
/// Boundary treatment: at x = 0 a missing lower neighbor is replaced by the
/// one-sided forward difference; at x = max the ghost node is linearly
/// extrapolated, which makes the forward difference equal the backward one
/// and the second difference vanish.
struct StencilOps {
    std::size_t dims = 1;
    std::size_t center = 0;
    std::array<DiffOp, 2> forward{};
    std::array<DiffOp, 2> backward{};
    std::array<DiffOp, 2> second{};
    DiffOp cross{};
    /// Seven-point cross differences with nonnegative off-center weights on
    /// the (1,1) diagonal (cross_pos) or the (1,-1) diagonal (cross_neg);
    /// the sign of the cross coefficient picks one. Equal to `cross` on
    /// edge cells.
    DiffOp cross_pos{};
    DiffOp cross_neg{};
    /// (V(x) - V(x + h(1,-1))) / h, i.e. the discrete d2V - d1V along the
    /// transfer-into-goal ray. Absent when the ray leaves the grid.
    std::optional<DiffOp> into_slope;
    /// (V(x) - V(x + h(-1,1))) / h, the discrete d1V - d2V.
    std::optional<DiffOp> out_slope;
};

namespace detail {

// Central first difference along one axis as (offset, weight) pairs, falling
// back to one-sided at either end.
inline std::array<std::pair<long, double>, 2> central_first(std::size_t i, std::size_t last,
                                                            double h) {
    if (i == 0) return {{{1, 1.0 / h}, {0, -1.0 / h}}};
    if (i == last) return {{{0, 1.0 / h}, {-1, -1.0 / h}}};
    return {{{1, 0.5 / h}, {-1, -0.5 / h}}};
}

}  // namespace detail

inline StencilOps stencil_ops(const SliceShape& shape, std::size_t cell) {
    StencilOps ops;
    ops.dims = shape.dims();
    ops.center = cell;
    const auto m = shape.multi(cell);

    auto linear = [&](std::size_t axis, long offset) -> std::size_t {
        std::array<long, 2> idx{static_cast<long>(m[0]), static_cast<long>(m[1])};
        idx[axis] += offset;
        if (shape.dims() == 1) return static_cast<std::size_t>(idx[0]);
        return shape.index(static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]));
    };

    for (std::size_t a = 0; a < shape.dims(); ++a) {
        const AxisGrid& ax = shape.axes[a];
        const std::size_t i = m[a];
        const std::size_t last = ax.last();
        const double h = ax.step;

        // first differences
        if (i < last) {
            ops.forward[a].add(linear(a, 1), 1.0 / h);
            ops.forward[a].add(cell, -1.0 / h);
        }
        if (i > 0) {
            ops.backward[a].add(cell, 1.0 / h);
            ops.backward[a].add(linear(a, -1), -1.0 / h);
        }
        if (i == last) ops.forward[a] = ops.backward[a];
        if (i == 0) ops.backward[a] = ops.forward[a];

        // second differences
        if (i > 0 && i < last) {
            ops.second[a].add(linear(a, 1), 1.0 / (h * h));
            ops.second[a].add(cell, -2.0 / (h * h));
            ops.second[a].add(linear(a, -1), 1.0 / (h * h));
        } else if (i == 0 && last >= 2) {
            ops.second[a].add(cell, 1.0 / (h * h));
            ops.second[a].add(linear(a, 1), -2.0 / (h * h));
            ops.second[a].add(linear(a, 2), 1.0 / (h * h));
        }
    }

    if (shape.dims() == 2) {
        // Product of central first differences; one-sided on the edges.
        const std::size_t l1 = shape.axes[0].last();
        const std::size_t l2 = shape.axes[1].last();
        for (const auto& [o1, w1] : detail::central_first(m[0], l1, shape.axes[0].step)) {
            for (const auto& [o2, w2] : detail::central_first(m[1], l2, shape.axes[1].step)) {
                ops.cross.add(shape.index(static_cast<std::size_t>(static_cast<long>(m[0]) + o1),
                                          static_cast<std::size_t>(static_cast<long>(m[1]) + o2)),
                              w1 * w2);
            }
        }
        ops.cross_pos = ops.cross;
        ops.cross_neg = ops.cross;
        if (m[0] > 0 && m[0] < l1 && m[1] > 0 && m[1] < l2) {
            const double q = 0.5 / (shape.axes[0].step * shape.axes[1].step);
            const std::size_t e = shape.index(m[0] + 1, m[1]);
            const std::size_t w = shape.index(m[0] - 1, m[1]);
            const std::size_t nn = shape.index(m[0], m[1] + 1);
            const std::size_t so = shape.index(m[0], m[1] - 1);
            DiffOp pos, neg;
            pos.add(shape.index(m[0] + 1, m[1] + 1), q);
            pos.add(shape.index(m[0] - 1, m[1] - 1), q);
            pos.add(cell, 2.0 * q);
            neg.add(shape.index(m[0] + 1, m[1] - 1), -q);
            neg.add(shape.index(m[0] - 1, m[1] + 1), -q);
            neg.add(cell, -2.0 * q);
            for (std::size_t nb : {e, w, nn, so}) {
                pos.add(nb, -q);
                neg.add(nb, q);
            }
            ops.cross_pos = pos;
            ops.cross_neg = neg;
        }

        const double h = shape.axes[0].step;
        if (m[0] < shape.axes[0].last() && m[1] > 0) {
            DiffOp d;
            d.add(cell, 1.0 / h);
            d.add(shape.index(m[0] + 1, m[1] - 1), -1.0 / h);
            ops.into_slope = d;
        }
        if (m[0] > 0 && m[1] < shape.axes[1].last()) {
            DiffOp d;
            d.add(cell, 1.0 / h);
            d.add(shape.index(m[0] - 1, m[1] + 1), -1.0 / h);
            ops.out_slope = d;
        }
    }
    return ops;
}

/// Evaluated difference quotients at one cell.
struct Stencil {
    std::size_t dims = 1;
    double center = 0.0;
    std::array<double, 2> forward{};
    std::array<double, 2> backward{};
    std::array<double, 2> second{};
    double cross = 0.0;
    double cross_pos = 0.0;
    double cross_neg = 0.0;
    std::optional<double> into_slope;
    std::optional<double> out_slope;
};

inline Stencil evaluate(const StencilOps& ops, std::span<const double> v) {
    Stencil s;
    s.dims = ops.dims;
    s.center = v[ops.center];
    for (std::size_t a = 0; a < ops.dims; ++a) {
        s.forward[a] = ops.forward[a].apply(v);
        s.backward[a] = ops.backward[a].apply(v);
        s.second[a] = ops.second[a].apply(v);
    }
    if (ops.dims == 2) {
        s.cross = ops.cross.apply(v);
        s.cross_pos = ops.cross_pos.apply(v);
        s.cross_neg = ops.cross_neg.apply(v);
        if (ops.into_slope) s.into_slope = ops.into_slope->apply(v);
        if (ops.out_slope) s.out_slope = ops.out_slope->apply(v);
    }
    return s;
}

inline Stencil stencil_at(const SliceShape& shape, std::span<const double> slice,
                          std::size_t cell) {
    return evaluate(stencil_ops(shape, cell), slice);
}

inline Stencil stencil_at(const ValueSurface& surface, std::size_t time_index, std::size_t cell) {
    return stencil_at(surface.shape, surface.slice(time_index), cell);
}

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    // avoid "-0.000000"
    if (std::string_view(buf) == "-0.000000") return "0.000000";
    return buf;
}

/// CSV with header `t,x,value` (1-D) or `t,x1,x2,value` (2-D), time-major then x1-major.
inline void write_surface_csv(std::ostream& out, const ValueSurface& s) {
    out << (s.shape.dims() == 1 ? "t,x,value\n" : "t,x1,x2,value\n");
    for (std::size_t n = 0; n < s.times.count; ++n) {
        const std::string t = fixed6(s.times.time(n));
        const auto slice = s.slice(n);
        for (std::size_t c = 0; c < s.shape.cells(); ++c) {
            const auto x = s.shape.coords(c);
            out << t << ',' << fixed6(x[0]);
            if (s.shape.dims() == 2) out << ',' << fixed6(x[1]);
            out << ',' << fixed6(slice[c]) << '\n';
        }
    }
}

}  // namespace goalgrid
