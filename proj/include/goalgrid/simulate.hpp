#pragma once

// Monte Carlo execution of the solved feedback policy. Allocations are read
// from the nearest grid cell of the current solver slice; transfer regions
// push the state along the transfer ray until the nearest cell is no longer
// in that region.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "goalgrid/coupling.hpp"
#include "goalgrid/error.hpp"
#include "goalgrid/model.hpp"
#include "goalgrid/parallel.hpp"
#include "goalgrid/regions.hpp"
#include "goalgrid/solver.hpp"

namespace goalgrid {

struct SimConfig {
    std::uint64_t seed = 0;
    std::size_t n_paths = 10000;
    /// Euler sub-step; 0 means a tenth of each period's solver step.
    double dt_sim = 0.0;
    std::array<double, 2> initial_wealth{};
    /// Paths written to the trace CSV when a trace stream is given.
    std::size_t trace_paths = 0;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Means over paths of each cost component.
struct CostBreakdown {
    double shortfall_1 = 0.0;
    double shortfall_2 = 0.0;
    double penalty_in = 0.0;   // lambda * amount moved into goal 1
    double penalty_out = 0.0;  // theta * amount moved out of goal 1
};

struct SimResult {
    double mean_objective = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    CostBreakdown breakdown;
    double mean_moved_in = 0.0;
    double mean_moved_out = 0.0;
};

/// splitmix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the independent stream of one path.
inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    return splitmix64(seed ^ splitmix64(path));
}

namespace detail {

inline std::size_t substeps(double solver_dt, double dt_sim) {
    if (dt_sim == 0.0) return 10;
    const double q = solver_dt / dt_sim;
    const double m = std::round(q);
    if (!(dt_sim > 0.0) || m < 1.0 || std::abs(q - m) > 1e-9 * m) {
        throw Error(ErrorKind::ConfigMismatch,
                    "dt_sim=" + std::to_string(dt_sim) + " does not divide the solver step " +
                        std::to_string(solver_dt),
                    "sim.dt_sim");
    }
    return static_cast<std::size_t>(m);
}

struct PathCosts {
    double shortfall_1 = 0.0;
    double shortfall_2 = 0.0;
    double penalty_in = 0.0;
    double penalty_out = 0.0;
    double moved_in = 0.0;
    double moved_out = 0.0;
};

struct TraceRow {
    double t;
    double x1;
    double x2;
    const char* event;
};

}  // namespace detail

/// Simulates `sim.n_paths` paths of the two-goal problem from t = 0 under the
/// solved policy and reports the realized objective. Paths draw from
/// independent streams, so the result does not depend on the worker count.
inline SimResult run_policy(const LastPeriodSolution& last, const CoupledSlice& coupled,
                            const TwoGoalSolution& two, const MarketParams& market,
                            const GoalLadder& ladder, const SimConfig& sim,
                            std::ostream* trace = nullptr) {
    if (sim.n_paths < 1) {
        throw Error(ErrorKind::ValidationError, "n_paths must be at least 1", "sim.n_paths");
    }
    const SliceShape& shape = two.surface.shape;
    const AxisGrid& ax = shape.axes[0];
    if (!(last.surface.shape.axes[0] == ax) || !(coupled.shape == shape)) {
        throw Error(ErrorKind::ConfigMismatch, "period grids of the solution disagree");
    }
    for (int p = 0; p < 2; ++p) {
        const double x = sim.initial_wealth[p];
        if (!(x >= 0.0 && x <= ax.max)) {
            throw Error(ErrorKind::ConfigMismatch, "initial wealth outside the solver domain",
                        p == 0 ? "sim.x1" : "sim.x2");
        }
    }
    const GoalSpec& g1 = ladder[0];
    const GoalSpec& g2 = ladder[1];
    const TimeLine& tl_two = two.surface.times;
    const TimeLine& tl_last = last.surface.times;
    const std::size_t sub_two = detail::substeps(tl_two.step, sim.dt_sim);
    const std::size_t sub_last = detail::substeps(tl_last.step, sim.dt_sim);

    const Matrix2 vol = cholesky_vol(market);
    const PolicyGrid grid_two(two.policy.allocation_step);
    const PolicyGrid grid_last(last.policy.allocation_step);
    const std::size_t n = shape.cells();
    const std::size_t last_idx = ax.last();
    const double h = ax.step;
    const double beta = market.discount;
    const double r = market.risk_free;

    auto growth = [&](const std::array<double, 2>& w, double dt, double z1, double z2) {
        const double drift = r + (market.drifts[0] - r) * w[0] + (market.drifts[1] - r) * w[1];
        const double shock = w[0] * (vol[0][0] * z1 + vol[0][1] * z2) +
                             w[1] * (vol[1][0] * z1 + vol[1][1] * z2);
        return drift * dt + shock;
    };

    std::vector<detail::PathCosts> costs(sim.n_paths);
    const std::size_t traced = trace ? std::min(sim.trace_paths, sim.n_paths) : 0;
    std::vector<std::vector<detail::TraceRow>> rows(traced);

    parallel_for(sim.n_paths, [&](std::size_t path) {
        std::mt19937_64 rng(path_seed(sim.seed, path));
        std::normal_distribution<double> normal(0.0, 1.0);
        detail::PathCosts pc;
        std::vector<detail::TraceRow>* tr = path < traced ? &rows[path] : nullptr;
        auto log = [&](double t, double a, double b, const char* e) {
            if (tr) tr->push_back({t, a, b, e});
        };

        double x1 = sim.initial_wealth[0];
        double x2 = sim.initial_wealth[1];
        log(0.0, x1, x2, "start");

        // Push the state out of a transfer region of slice k.
        auto project = [&](std::size_t k, double t) {
            const std::size_t i1 = ax.nearest(x1);
            const std::size_t i2 = ax.nearest(x2);
            const RegionLabel lab = two.labels[k * n + shape.index(i1, i2)];
            if (lab == RegionLabel::Continue) return;
            const bool into = lab == RegionLabel::TransferIntoGoal;
            std::size_t j = 0;
            while (true) {
                const std::size_t nj = j + 1;
                const bool fits = into ? (i1 + nj <= last_idx && nj <= i2)
                                       : (nj <= i1 && i2 + nj <= last_idx);
                if (!fits) break;
                j = nj;
                const std::size_t c =
                    into ? shape.index(i1 + j, i2 - j) : shape.index(i1 - j, i2 + j);
                if (two.labels[k * n + c] != lab) break;
            }
            double amount = static_cast<double>(j) * h;
            amount = std::min(amount, into ? x2 : x1);
            if (!(amount > 0.0)) return;
            const double disc = std::exp(-beta * t);
            if (into) {
                x1 += amount;
                x2 -= amount;
                pc.penalty_in += disc * g1.penalty_in * amount;
                pc.moved_in += amount;
                log(t, x1, x2, "transfer_in");
            } else {
                x1 -= amount;
                x2 += amount;
                pc.penalty_out += disc * g1.penalty_out * amount;
                pc.moved_out += amount;
                log(t, x1, x2, "transfer_out");
            }
        };

        // Both goals active.
        for (std::size_t k = 0; k + 1 < tl_two.count; ++k) {
            const double t0 = tl_two.time(k);
            const double dt = (tl_two.time(k + 1) - t0) / static_cast<double>(sub_two);
            for (std::size_t s = 0; s < sub_two; ++s) {
                const double t = t0 + static_cast<double>(s) * dt;
                project(k, t);
                const std::size_t c = shape.nearest(x1, x2);
                const auto& w1 = grid_two.weights(static_cast<std::size_t>(two.policy.code(0, k, c)));
                const auto& w2 = grid_two.weights(static_cast<std::size_t>(two.policy.code(1, k, c)));
                const double z1 = normal(rng) * std::sqrt(dt);
                const double z2 = normal(rng) * std::sqrt(dt);
                if (x1 > 0.0) x1 = std::max(0.0, x1 + x1 * growth(w1, dt, z1, z2));
                if (x2 > 0.0) x2 = std::max(0.0, x2 + x2 * growth(w2, dt, z1, z2));
            }
            log(tl_two.time(k + 1), x1, x2, "step");
        }

        // Deadline of goal 1: apply the coupling plan of the nearest cell.
        {
            const double t = tl_two.end;
            const TransferDecision& d = coupled.plan[shape.nearest(x1, x2)];
            const double disc = std::exp(-beta * t);
            if (d.into_goal() > 0.0) {
                const double amount = std::min(d.into_goal(), x2);
                x1 += amount;
                x2 -= amount;
                pc.penalty_in += disc * g1.penalty_in * amount;
                pc.moved_in += amount;
            } else if (d.out_of_goal() > 0.0) {
                const double amount = std::min(d.out_of_goal(), x1);
                x1 -= amount;
                x2 += amount;
                pc.penalty_out += disc * g1.penalty_out * amount;
                pc.moved_out += amount;
            }
            pc.shortfall_1 = disc * g1.weight * std::max(g1.target_amount - x1, 0.0);
            log(t, x1, x2, "deadline");
        }

        // Fundamental goal alone.
        for (std::size_t k = 0; k + 1 < tl_last.count; ++k) {
            const double t0 = tl_last.time(k);
            const double dt = (tl_last.time(k + 1) - t0) / static_cast<double>(sub_last);
            for (std::size_t s = 0; s < sub_last; ++s) {
                const std::size_t c = ax.nearest(x2);
                const auto& w = grid_last.weights(static_cast<std::size_t>(last.policy.code(0, k, c)));
                const double z1 = normal(rng) * std::sqrt(dt);
                const double z2 = normal(rng) * std::sqrt(dt);
                if (x2 > 0.0) x2 = std::max(0.0, x2 + x2 * growth(w, dt, z1, z2));
            }
        }
        pc.shortfall_2 = std::exp(-beta * tl_last.end) * g2.weight *
                         std::max(g2.target_amount - x2, 0.0);
        log(tl_last.end, x1, x2, "end");
        costs[path] = pc;
    });

    const std::size_t m = sim.n_paths;
    std::vector<double> buf(m);
    auto mean_of = [&](auto field) {
        for (std::size_t i = 0; i < m; ++i) buf[i] = field(costs[i]);
        return pairwise_sum(buf.data(), m) / static_cast<double>(m);
    };
    SimResult res;
    res.n_paths = m;
    res.breakdown.shortfall_1 = mean_of([](const auto& c) { return c.shortfall_1; });
    res.breakdown.shortfall_2 = mean_of([](const auto& c) { return c.shortfall_2; });
    res.breakdown.penalty_in = mean_of([](const auto& c) { return c.penalty_in; });
    res.breakdown.penalty_out = mean_of([](const auto& c) { return c.penalty_out; });
    res.mean_moved_in = mean_of([](const auto& c) { return c.moved_in; });
    res.mean_moved_out = mean_of([](const auto& c) { return c.moved_out; });
    auto total = [](const detail::PathCosts& c) {
        return c.shortfall_1 + c.shortfall_2 + c.penalty_in + c.penalty_out;
    };
    res.mean_objective = mean_of(total);
    for (std::size_t i = 0; i < m; ++i) {
        const double d = total(costs[i]) - res.mean_objective;
        buf[i] = d * d;
    }
    if (m > 1) {
        const double var = pairwise_sum(buf.data(), m) / static_cast<double>(m - 1);
        res.std_error = std::sqrt(var / static_cast<double>(m));
    }

    if (trace) {
        *trace << "path,t,x1,x2,event\n";
        for (std::size_t p = 0; p < traced; ++p) {
            for (const auto& row : rows[p]) {
                *trace << p << ',' << fixed6(row.t) << ',' << fixed6(row.x1) << ','
                       << fixed6(row.x2) << ',' << row.event << '\n';
            }
        }
    }
    return res;
}

}  // namespace goalgrid
