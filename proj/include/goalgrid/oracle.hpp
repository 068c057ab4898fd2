#pragma once

// Brute-force discrete-time dynamic program on small grids, used to check the
// PDE solver. It shares only the domain types with the solver: the
// dynamics, the allocation lattice, the transfer rule and the deadline
// coupling are all enumerated here from scratch.
//
// Each Brownian dimension moves by +-sqrt(dt) with probability 1/2, so the
// four joint outcomes have exactly the mean and covariance of the Euler
// increment. Off-grid successors are read by (bi)linear interpolation,
// clamped to the domain.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/model.hpp"
#include "goalgrid/parallel.hpp"

namespace goalgrid {

struct OracleConfig {
    double x_max = 10.0;
    double dx = 0.5;
    double dt = 0.25;
    double allocation_step = 0.25;
    double budget = 1e8;
};

struct OracleResult {
    ValueSurface last;  // fundamental goal alone on [T_1, T]
    ValueSurface two;   // both goals on [0, T_1]; last slice is the coupled T_1^- value
    double work = 0.0;  // states * controls * outcomes of the largest step
};

namespace detail {

struct Outcome {
    double prob;
    std::array<double, 2> shock;  // sigma * dW per stock
};

inline std::array<Outcome, 4> two_point_noise(const MarketParams& market, double dt) {
    const Matrix2 s = cholesky_vol(market);
    const double q = std::sqrt(dt);
    std::array<Outcome, 4> out{};
    int k = 0;
    for (double e1 : {-q, q}) {
        for (double e2 : {-q, q}) {
            out[k++] = Outcome{0.25, {s[0][0] * e1 + s[0][1] * e2, s[1][0] * e1 + s[1][1] * e2}};
        }
    }
    return out;
}

inline std::vector<std::array<double, 2>> allocation_lattice(double step) {
    const double m = std::round(1.0 / step);
    if (!(step > 0.0) || std::abs(m * step - 1.0) > 1e-9) {
        throw Error(ErrorKind::ValidationError, "allocation step must divide 1",
                    "oracle.allocation_step");
    }
    const int n = static_cast<int>(m);
    std::vector<std::array<double, 2>> out;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) out.push_back({i / m, j / m});
    return out;
}

inline double lerp_axis(const AxisGrid& ax, std::span<const double> v, double x) {
    const double u = std::clamp(x, 0.0, ax.max) / ax.step;
    const auto i = std::min(static_cast<std::size_t>(u), ax.count - 2);
    const double f = u - static_cast<double>(i);
    return (1.0 - f) * v[i] + f * v[i + 1];
}

inline double lerp_plane(const AxisGrid& ax, std::span<const double> v, double x1, double x2) {
    const std::size_t n = ax.count;
    const double u1 = std::clamp(x1, 0.0, ax.max) / ax.step;
    const double u2 = std::clamp(x2, 0.0, ax.max) / ax.step;
    const auto i = std::min(static_cast<std::size_t>(u1), n - 2);
    const auto j = std::min(static_cast<std::size_t>(u2), n - 2);
    const double f = u1 - static_cast<double>(i);
    const double g = u2 - static_cast<double>(j);
    return (1.0 - f) * ((1.0 - g) * v[i * n + j] + g * v[i * n + j + 1]) +
           f * ((1.0 - g) * v[(i + 1) * n + j] + g * v[(i + 1) * n + j + 1]);
}

}  // namespace detail

/// Backward induction over both periods of a two-goal ladder. Before T_1 the
/// DP may move one wealth step along either transfer ray per time step; at
/// T_1 any grid-quantized amount may move. Throws BudgetExceeded when one
/// step would enumerate more than `budget` state/control/outcome triples.
inline OracleResult dp_value(const MarketParams& market, const GoalLadder& ladder,
                             const OracleConfig& cfg) {
    validate_market(market);
    validate_ladder(ladder);
    if (ladder.size() != 2) {
        throw Error(ErrorKind::ValidationError, "the oracle handles exactly two goals", "goals");
    }
    const GoalSpec& g1 = ladder[0];
    const GoalSpec& g2 = ladder[1];
    const AxisGrid ax = make_axis(cfg.x_max, cfg.dx);
    const TimeLine tl_last = make_timeline(g1.deadline, g2.deadline, cfg.dt);
    const TimeLine tl_two = make_timeline(0.0, g1.deadline, cfg.dt);
    const auto alloc = detail::allocation_lattice(cfg.allocation_step);
    const std::size_t na = alloc.size();
    const std::size_t n = ax.count;
    const double h = ax.step;

    OracleResult res;
    const double work_last = static_cast<double>(n) * static_cast<double>(na) * 4.0;
    const double work_two =
        static_cast<double>(n * n) * static_cast<double>(na * na) * 3.0 * 4.0;
    res.work = std::max(work_last, work_two);
    if (res.work > cfg.budget) {
        throw Error(ErrorKind::BudgetExceeded,
                    "oracle step needs " + std::to_string(res.work) + " evaluations, budget " +
                        std::to_string(cfg.budget));
    }

    std::vector<double> excess(na);
    for (std::size_t a = 0; a < na; ++a) {
        excess[a] = (market.drifts[0] - market.risk_free) * alloc[a][0] +
                    (market.drifts[1] - market.risk_free) * alloc[a][1];
    }

    // Fundamental goal alone.
    res.last = ValueSurface(1, tl_last, SliceShape{{ax}});
    {
        auto term = res.last.slice(tl_last.count - 1);
        for (std::size_t i = 0; i < n; ++i) term[i] = std::max(g2.target_amount - ax.coord(i), 0.0);
    }
    for (std::size_t k = tl_last.count - 1; k-- > 0;) {
        const double dt = tl_last.time(k + 1) - tl_last.time(k);
        const double disc = std::exp(-market.discount * dt);
        const auto noise = detail::two_point_noise(market, dt);
        const auto next = res.last.slice(k + 1);
        auto cur = res.last.slice(k);
        parallel_for(n, [&](std::size_t i) {
            const double x = ax.coord(i);
            double best = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                double ev = 0.0;
                for (const auto& o : noise) {
                    const double y = x + x * ((market.risk_free + excess[a]) * dt +
                                              alloc[a][0] * o.shock[0] + alloc[a][1] * o.shock[1]);
                    ev += o.prob * detail::lerp_axis(ax, next, y);
                }
                if (a == 0 || ev < best) best = ev;
            }
            cur[i] = disc * best;
        });
    }

    // Coupling at T_1 by enumeration of every grid-quantized net transfer.
    res.two = ValueSurface(0, tl_two, SliceShape{{ax, ax}});
    {
        const auto v2 = res.last.slice(0);
        auto out = res.two.slice(tl_two.count - 1);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double best = std::numeric_limits<double>::infinity();
                // d > 0 moves d steps into goal 1, d < 0 moves -d steps out.
                for (long d = -static_cast<long>(i); d <= static_cast<long>(j); ++d) {
                    const long i2 = static_cast<long>(i) + d;
                    const long j2 = static_cast<long>(j) - d;
                    if (i2 >= static_cast<long>(n) || j2 >= static_cast<long>(n)) continue;
                    const double amount = static_cast<double>(d < 0 ? -d : d) * h;
                    const double fee = (d > 0 ? g1.penalty_in : g1.penalty_out) * amount;
                    const double cost =
                        fee +
                        g1.weight * std::max(g1.target_amount - ax.coord(static_cast<std::size_t>(i2)),
                                             0.0) +
                        v2[static_cast<std::size_t>(j2)];
                    best = std::min(best, cost);
                }
                out[i * n + j] = best;
            }
        }
    }

    // Both goals active: invest, after at most one step along a transfer ray.
    std::vector<double> cont(n * n);
    for (std::size_t k = tl_two.count - 1; k-- > 0;) {
        const double dt = tl_two.time(k + 1) - tl_two.time(k);
        const double disc = std::exp(-market.discount * dt);
        const auto noise = detail::two_point_noise(market, dt);
        const auto next = res.two.slice(k + 1);
        parallel_for(n * n, [&](std::size_t c) {
            const double x1 = ax.coord(c / n);
            const double x2 = ax.coord(c % n);
            double best = 0.0;
            bool first = true;
            for (std::size_t a1 = 0; a1 < na; ++a1) {
                for (std::size_t a2 = 0; a2 < na; ++a2) {
                    double ev = 0.0;
                    for (const auto& o : noise) {
                        const double y1 =
                            x1 + x1 * ((market.risk_free + excess[a1]) * dt +
                                       alloc[a1][0] * o.shock[0] + alloc[a1][1] * o.shock[1]);
                        const double y2 =
                            x2 + x2 * ((market.risk_free + excess[a2]) * dt +
                                       alloc[a2][0] * o.shock[0] + alloc[a2][1] * o.shock[1]);
                        ev += o.prob * detail::lerp_plane(ax, next, y1, y2);
                    }
                    if (first || ev < best) best = ev;
                    first = false;
                }
            }
            cont[c] = disc * best;
        });
        auto cur = res.two.slice(k);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double best = cont[i * n + j];
                if (j > 0 && i + 1 < n)
                    best = std::min(best, g1.penalty_in * h + cont[(i + 1) * n + j - 1]);
                if (i > 0 && j + 1 < n)
                    best = std::min(best, g1.penalty_out * h + cont[(i - 1) * n + j + 1]);
                cur[i * n + j] = best;
            }
        }
    }
    return res;
}

struct OracleComparison {
    double sup_last = 0.0;      // one-goal period, every slice
    double sup_two = 0.0;       // two-goal period, every slice
    double sup_t0 = 0.0;
    double sup_deadline = 0.0;  // coupled slice at T_1
    double sup = 0.0;
    double oracle_corner = 0.0;  // V(0, 0, 0)
    double solver_corner = 0.0;
};

/// Sup-norm gaps between the oracle and solver surfaces on identical grids.
inline OracleComparison compare_surfaces(const OracleResult& oracle, const ValueSurface& last,
                                         const ValueSurface& two) {
    if (!(oracle.last.shape == last.shape) || !(oracle.last.times == last.times) ||
        !(oracle.two.shape == two.shape) || !(oracle.two.times == two.times)) {
        throw Error(ErrorKind::ConfigMismatch, "oracle and solver grids differ");
    }
    auto sup = [](std::span<const double> a, std::span<const double> b) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    };
    OracleComparison c;
    c.sup_last = sup(oracle.last.values, last.values);
    c.sup_two = sup(oracle.two.values, two.values);
    c.sup_t0 = sup(oracle.two.slice(0), two.slice(0));
    c.sup_deadline = sup(oracle.two.slice(two.times.count - 1), two.slice(two.times.count - 1));
    c.sup = std::max(c.sup_last, c.sup_two);
    c.oracle_corner = oracle.two.at(0, 0);
    c.solver_corner = two.at(0, 0);
    return c;
}

}  // namespace goalgrid
