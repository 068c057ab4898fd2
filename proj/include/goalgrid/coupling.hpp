#pragma once

// Deadline coupling: the value right before a goal expires, obtained from the
// value right after it by choosing the best single net transfer along the
// (1, -1) ray. Transfers are quantized to the wealth step, so every candidate
// lands on a grid node and the minimization is exact enumeration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/model.hpp"

namespace goalgrid {

struct CoupledSlice {
    SliceShape shape;  // (x1, x2)
    std::vector<double> values;
    /// w (G - x1)^+ + V_next(x2): cost with no transfer.
    std::vector<double> no_transfer;
    std::vector<TransferDecision> plan;

    std::array<double, 2> post_transfer(std::size_t cell) const {
        const auto x = shape.coords(cell);
        const double net = plan[cell].net();
        return {x[0] + net, x[1] - net};
    }
};

/// V(T_k, x1, x2) = min over l, m >= 0 (one of them zero, both on the grid)
/// of lambda l + theta m + w (G - (x1 + l - m))^+ + V_next(x2 - l + m).
/// Ties go to the smaller transfer.
inline CoupledSlice couple_at_deadline(std::span<const double> v_next, const GoalSpec& goal,
                                       const AxisGrid& axis) {
    if (v_next.size() != axis.count) {
        throw Error(ErrorKind::ConfigMismatch, "deadline slice does not match the wealth axis");
    }
    CoupledSlice out;
    out.shape = SliceShape{{axis, axis}};
    const std::size_t n = axis.count;
    const std::size_t last = axis.last();
    const double h = axis.step;
    out.values.resize(n * n);
    out.no_transfer.resize(n * n);
    out.plan.resize(n * n);

    auto shortfall = [&](std::size_t i1) {
        return goal.weight * std::max(goal.target_amount - axis.coord(i1), 0.0);
    };

    for (std::size_t i1 = 0; i1 < n; ++i1) {
        for (std::size_t i2 = 0; i2 < n; ++i2) {
            const std::size_t c = out.shape.index(i1, i2);
            const double stay = shortfall(i1) + v_next[i2];
            double best = stay;
            TransferDecision plan;
            const std::size_t max_in = std::min(i2, last - i1);
            const std::size_t max_out = std::min(i1, last - i2);
            for (std::size_t k = 1; k <= std::max(max_in, max_out); ++k) {
                const double amount = static_cast<double>(k) * h;
                if (k <= max_in) {
                    const double cost =
                        goal.penalty_in * amount + shortfall(i1 + k) + v_next[i2 - k];
                    if (cost < best - 1e-12) {
                        best = cost;
                        plan = TransferDecision::into_goal(amount);
                    }
                }
                if (k <= max_out) {
                    const double cost =
                        goal.penalty_out * amount + shortfall(i1 - k) + v_next[i2 + k];
                    if (cost < best - 1e-12) {
                        best = cost;
                        plan = TransferDecision::out_of_goal(amount);
                    }
                }
            }
            out.values[c] = best;
            out.no_transfer[c] = stay;
            out.plan[c] = plan;
        }
    }
    return out;
}

/// Terms of the deadline max-equation at every cell. Ray slopes that leave the
/// grid are -infinity.
struct DeadlineGaps {
    std::vector<double> obstacle;  // V - no_transfer
    std::vector<double> into;      // -lambda + (V(x) - V(x + h(1,-1))) / h
    std::vector<double> out;       // -theta + (V(x) - V(x + h(-1,1))) / h
};

inline DeadlineGaps deadline_gaps(const CoupledSlice& s, const GoalSpec& goal) {
    const std::size_t n = s.values.size();
    DeadlineGaps g;
    g.obstacle.resize(n);
    g.into.assign(n, -std::numeric_limits<double>::infinity());
    g.out.assign(n, -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < n; ++c) {
        g.obstacle[c] = s.values[c] - s.no_transfer[c];
        const StencilOps ops = stencil_ops(s.shape, c);
        if (ops.into_slope) g.into[c] = ops.into_slope->apply(s.values) - goal.penalty_in;
        if (ops.out_slope) g.out[c] = ops.out_slope->apply(s.values) - goal.penalty_out;
    }
    return g;
}

struct CouplingViolation {
    std::size_t cell = 0;
    double max_term = 0.0;
};

/// Checks the discrete deadline variational inequality: every term of the max
/// is <= tol and at least one is >= -tol. Returns offending cells.
inline std::vector<CouplingViolation> verify_coupling_vi(const CoupledSlice& s,
                                                         const GoalSpec& goal, double tol) {
    const DeadlineGaps g = deadline_gaps(s, goal);
    std::vector<CouplingViolation> out;
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        const double m = std::max({g.obstacle[c], g.into[c], g.out[c]});
        if (m > tol || m < -tol) out.push_back({c, m});
    }
    return out;
}

/// CSV `x1,x2,value,transfer_l,transfer_m`, x1-major.
inline void write_coupled_csv(std::ostream& os, const CoupledSlice& s) {
    os << "x1,x2,value,transfer_l,transfer_m\n";
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        const auto x = s.shape.coords(c);
        os << fixed6(x[0]) << ',' << fixed6(x[1]) << ',' << fixed6(s.values[c]) << ','
           << fixed6(s.plan[c].into_goal()) << ',' << fixed6(s.plan[c].out_of_goal()) << '\n';
    }
}

}  // namespace goalgrid
