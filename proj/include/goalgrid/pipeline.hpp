#pragma once

// Full backward pass for a two-goal run: the one-goal period first, then the
// deadline coupling, then the two-goal period.

#include "goalgrid/config.hpp"
#include "goalgrid/coupling.hpp"
#include "goalgrid/simulate.hpp"
#include "goalgrid/solver.hpp"

namespace goalgrid {

struct SolveReport {
    RunConfig config;
    LastPeriodSolution last;
    CoupledSlice coupled;
    TwoGoalSolution two;
};

inline SolveReport solve_all(const RunConfig& config) {
    SolveReport r;
    r.config = config;
    const AxisGrid axis = config.axis();
    r.last = solve_last_period(config.market, config.ladder, axis, config.last_times(),
                               config.solver);
    r.coupled = couple_at_deadline(r.last.surface.slice(0), config.ladder[0], axis);
    r.two = solve_two_goal_period(r.coupled, config.market, config.ladder, axis,
                                  config.two_goal_times(), config.solver, config.label_tol);
    return r;
}

/// Index of the last two-goal slice strictly before the deadline, where the
/// region maps and allocation tables are reported (t = 0.8 on the benchmark).
inline std::size_t pre_deadline_slice(const SolveReport& r) {
    const std::size_t count = r.two.surface.times.count;
    return count >= 2 ? count - 2 : 0;
}

inline SimResult run_policy(const SolveReport& r, const SimConfig& sim,
                            std::ostream* trace = nullptr) {
    return run_policy(r.last, r.coupled, r.two, r.config.market, r.config.ladder, sim, trace);
}

}  // namespace goalgrid
