#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "goalgrid/coupling.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/hamiltonian.hpp"
#include "goalgrid/model.hpp"
#include "goalgrid/regions.hpp"
#include "goalgrid/stepper.hpp"

namespace goalgrid {

/// Per-slice optimal strategy codes for each active portfolio, time-major.
struct PolicyField {
    double allocation_step = 0.0;
    std::size_t portfolios = 1;
    std::size_t cells = 0;
    std::array<std::vector<int>, 2> codes;

    int code(std::size_t portfolio, std::size_t time_index, std::size_t cell) const {
        return codes[portfolio][time_index * cells + cell];
    }
};

struct StepDiagnostics {
    double time = 0.0;
    int iterations = 0;
    double final_change = 0.0;
    double linear_residual = 0.0;
    double max_residual = 0.0;
};

/// One-wealth period [T_K, T] after every goal but the fundamental one expired.
struct LastPeriodSolution {
    ValueSurface surface;
    PolicyField policy;
    std::vector<StepDiagnostics> steps;
};

/// Two-wealth period [0, T_1]. Slice count-1 is the coupled deadline slice.
struct TwoGoalSolution {
    ValueSurface surface;
    PolicyField policy;
    /// Terms of the max-equation per slice, time-major; at the deadline slice
    /// pde_term holds the obstacle gap.
    std::vector<double> pde_term;
    std::vector<double> into_gap;
    std::vector<double> out_gap;
    std::vector<RegionLabel> labels;
    std::vector<StepDiagnostics> steps;
};

namespace detail {

inline StepDiagnostics diagnostics_of(const StepResult& r, double t) {
    return StepDiagnostics{t, r.iterations, r.history.empty() ? 0.0 : r.history.back(),
                           r.linear_residual, r.max_residual};
}

}  // namespace detail

/// Solves the classical one-wealth HJB on [times.start, times.end] backward
/// from V(T, x) = (G - x)^+ for the fundamental goal of the ladder.
inline LastPeriodSolution solve_last_period(const MarketParams& market, const GoalLadder& ladder,
                                            const AxisGrid& axis, const TimeLine& times,
                                            const SolverConfig& config) {
    const GoalSpec& goal = ladder.fundamental();
    const std::size_t period = ladder.size() - 1;
    LastPeriodSolution sol;
    sol.surface = ValueSurface(period, times, SliceShape{{axis}});
    const SliceShape& shape = sol.surface.shape;
    const std::size_t n = shape.cells();

    sol.policy.allocation_step = config.allocation_step_fine;
    sol.policy.portfolios = 1;
    sol.policy.cells = n;
    sol.policy.codes[0].assign(times.count * n, 0);

    auto terminal = sol.surface.slice(times.count - 1);
    for (std::size_t c = 0; c < n; ++c) {
        terminal[c] = std::max(goal.target_amount - axis.coord(c), 0.0);
    }

    const PolicyGrid grid(config.allocation_step_fine);
    const ControlTable ct(grid, market);
    for (std::size_t k = times.count - 1; k-- > 0;) {
        StepProblem p;
        p.shape = &shape;
        p.controls = &ct;
        p.discount = market.discount;
        p.time = times.time(k);
        p.dt = times.time(k + 1) - times.time(k);
        p.corner_value = supersolution_bound(ladder, market, period, p.time);
        p.config = config;
        StepResult r = step_backward(sol.surface.slice(k + 1), p);
        std::copy(r.values.begin(), r.values.end(), sol.surface.slice(k).begin());
        std::copy(r.codes[0].begin(), r.codes[0].end(), sol.policy.codes[0].begin() + k * n);
        sol.steps.push_back(detail::diagnostics_of(r, p.time));
    }
    std::reverse(sol.steps.begin(), sol.steps.end());
    return sol;
}

/// Solves the penalized two-wealth equation on [times.start, times.end]
/// backward from the coupled deadline slice.
inline TwoGoalSolution solve_two_goal_period(const CoupledSlice& deadline, const MarketParams& market,
                                             const GoalLadder& ladder, const AxisGrid& axis,
                                             const TimeLine& times, const SolverConfig& config,
                                             double label_tol = kLabelTolerance) {
    const GoalSpec& goal = ladder[0];
    TwoGoalSolution sol;
    sol.surface = ValueSurface(0, times, SliceShape{{axis, axis}});
    const SliceShape& shape = sol.surface.shape;
    if (!(deadline.shape == shape)) {
        throw Error(ErrorKind::ConfigMismatch, "coupled slice grid differs from period grid");
    }
    const std::size_t n = shape.cells();
    const std::size_t total = times.count * n;

    sol.policy.allocation_step = config.allocation_step_coarse;
    sol.policy.portfolios = 2;
    sol.policy.cells = n;
    sol.policy.codes[0].assign(total, 0);
    sol.policy.codes[1].assign(total, 0);
    sol.pde_term.assign(total, 0.0);
    sol.into_gap.assign(total, 0.0);
    sol.out_gap.assign(total, 0.0);
    sol.labels.assign(total, RegionLabel::Continue);

    const std::size_t last = times.count - 1;
    std::copy(deadline.values.begin(), deadline.values.end(), sol.surface.slice(last).begin());
    {
        const DeadlineGaps g = deadline_gaps(deadline, goal);
        std::copy(g.obstacle.begin(), g.obstacle.end(), sol.pde_term.begin() + last * n);
        std::copy(g.into.begin(), g.into.end(), sol.into_gap.begin() + last * n);
        std::copy(g.out.begin(), g.out.end(), sol.out_gap.begin() + last * n);
        const auto labels = labels_from_plan(deadline);
        std::copy(labels.begin(), labels.end(), sol.labels.begin() + last * n);
    }

    const PolicyGrid grid(config.allocation_step_coarse);
    const ControlTable ct(grid, market);
    for (std::size_t k = last; k-- > 0;) {
        StepProblem p;
        p.shape = &shape;
        p.controls = &ct;
        p.discount = market.discount;
        p.time = times.time(k);
        p.dt = times.time(k + 1) - times.time(k);
        p.corner_value = supersolution_bound(ladder, market, 0, p.time);
        p.penalties = TransferPenalties{goal.penalty_in, goal.penalty_out};
        p.config = config;
        StepResult r = step_backward(sol.surface.slice(k + 1), p);
        const std::size_t off = k * n;
        std::copy(r.values.begin(), r.values.end(), sol.surface.slice(k).begin());
        std::copy(r.codes[0].begin(), r.codes[0].end(), sol.policy.codes[0].begin() + off);
        std::copy(r.codes[1].begin(), r.codes[1].end(), sol.policy.codes[1].begin() + off);
        std::copy(r.pde_term.begin(), r.pde_term.end(), sol.pde_term.begin() + off);
        std::copy(r.into_gap.begin(), r.into_gap.end(), sol.into_gap.begin() + off);
        std::copy(r.out_gap.begin(), r.out_gap.end(), sol.out_gap.begin() + off);
        const auto labels = classify(std::span<const double>(r.pde_term),
                                     std::span<const double>(r.into_gap),
                                     std::span<const double>(r.out_gap), label_tol);
        std::copy(labels.begin(), labels.end(), sol.labels.begin() + off);
        sol.steps.push_back(detail::diagnostics_of(r, p.time));
    }
    std::reverse(sol.steps.begin(), sol.steps.end());
    return sol;
}

}  // namespace goalgrid
