#pragma once

// Implicit backward-in-time step of the penalized HJB equation, solved by
// policy iteration. One code path serves both the one-wealth and the
// two-wealth periods; transfer penalties only apply when two portfolios are
// active.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/hamiltonian.hpp"
#include "goalgrid/parallel.hpp"

namespace goalgrid {

struct SolverConfig {
    double penalty_scale = 1e6;
    double policy_tol = 1e-7;
    int max_policy_iters = 200;
    double allocation_step_fine = 0.01;
    double allocation_step_coarse = 0.25;

    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

inline const SolverConfig& validate_solver(const SolverConfig& c) {
    if (!(c.penalty_scale > 0.0))
        throw Error(ErrorKind::ValidationError, "must be positive", "solver.penalty_scale");
    if (!(c.policy_tol > 0.0))
        throw Error(ErrorKind::ValidationError, "must be positive", "solver.policy_tol");
    if (c.max_policy_iters < 1)
        throw Error(ErrorKind::ValidationError, "must be at least 1", "solver.max_policy_iters");
    PolicyGrid check_fine(c.allocation_step_fine);
    PolicyGrid check_coarse(c.allocation_step_coarse);
    return c;
}

/// Everything one implicit step needs besides the older slice.
struct StepProblem {
    const SliceShape* shape = nullptr;
    const ControlTable* controls = nullptr;
    double discount = 0.0;
    double time = 0.0;            // time of the slice being computed
    double dt = 0.0;
    double corner_value = 0.0;    // V at zero wealth in every portfolio
    TransferPenalties penalties;  // two-wealth period only
    SolverConfig config;
};

struct StepResult {
    std::vector<double> values;
    /// Argmin codes per active portfolio (index 0 = goal portfolio when two
    /// are active, the fundamental portfolio otherwise).
    std::array<std::vector<int>, 2> codes;
    /// beta V - dV/dt - H at the converged slice.
    std::vector<double> pde_term;
    /// -lambda + (d2V - d1V) and -theta + (d1V - d2V) along the transfer rays;
    /// -infinity where the ray leaves the grid. Empty in the one-wealth period.
    std::vector<double> into_gap;
    std::vector<double> out_gap;
    int iterations = 0;
    std::vector<double> history;
    double linear_residual = 0.0;
    double max_residual = 0.0;
};

namespace detail {

inline constexpr std::size_t kStallWindow = 4;
inline constexpr double kMinRelax = 1.0 / 16.0;

struct FrozenControl {
    std::array<int, 2> codes{};
    bool into = false;
    bool out = false;
};

inline CellState cell_state(const SliceShape& shape, std::size_t cell) {
    CellState cs;
    cs.dims = shape.dims();
    cs.wealth = shape.coords(cell);
    return cs;
}

inline void add_op(std::vector<Eigen::Triplet<double>>& trips, std::size_t row, const DiffOp& op,
                   double scale) {
    if (scale == 0.0) return;
    for (std::size_t k = 0; k < op.size; ++k) {
        trips.emplace_back(static_cast<int>(row), static_cast<int>(op.taps[k].cell),
                           scale * op.taps[k].weight);
    }
}

}  // namespace detail

/// Computes the slice at `problem.time` from the slice one step later.
///
/// Each sweep freezes the argmin allocations and the active penalty
/// indicators at the current iterate and solves the resulting linear system.
/// Stops when successive iterates differ by less than policy_tol in sup norm.
inline StepResult step_backward(std::span<const double> older, const StepProblem& problem) {
    const SliceShape& shape = *problem.shape;
    const ControlTable& ct = *problem.controls;
    const SolverConfig& cfg = problem.config;
    const std::size_t n = shape.cells();
    const bool two = shape.dims() == 2;
    const double inv_dt = 1.0 / problem.dt;
    const double s = cfg.penalty_scale;

    std::vector<StencilOps> ops(n);
    std::vector<CellState> cells(n);
    for (std::size_t c = 0; c < n; ++c) {
        ops[c] = stencil_ops(shape, c);
        cells[c] = detail::cell_state(shape, c);
    }

    StepResult out;
    std::vector<double> v(older.begin(), older.end());
    v[0] = problem.corner_value;
    std::vector<detail::FrozenControl> frozen(n);

    auto freeze = [&](std::span<const double> iterate) {
        parallel_for(n, [&](std::size_t c) {
            if (c == 0) return;
            const Stencil st = evaluate(ops[c], iterate);
            detail::FrozenControl f;
            f.codes = hamiltonian_min(cells[c], st, ct).codes;
            if (two) {
                f.into = st.into_slope && *st.into_slope - problem.penalties.into > 0.0;
                f.out = st.out_slope && *st.out_slope - problem.penalties.out > 0.0;
            }
            frozen[c] = f;
        });
    };

    Eigen::SparseMatrix<double> a(static_cast<int>(n), static_cast<int>(n));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    auto assemble = [&] {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(n * 16);
        trips.emplace_back(0, 0, 1.0);
        rhs[0] = problem.corner_value;
        for (std::size_t c = 1; c < n; ++c) {
            const CellState& cs = cells[c];
            const StencilOps& op = ops[c];
            const auto& f = frozen[c];
            double b = older[c] * inv_dt;
            trips.emplace_back(static_cast<int>(c), static_cast<int>(c), inv_dt + problem.discount);

            const double r = ct.risk_free();
            for (std::size_t ax = 0; ax < shape.dims(); ++ax) {
                const auto code = static_cast<std::size_t>(f.codes[ax]);
                const double x = cs.wealth[ax];
                const double drift = (r + ct.excess(code)) * x;
                detail::add_op(trips, c, drift >= 0.0 ? op.forward[ax] : op.backward[ax], -drift);
                detail::add_op(trips, c, op.second[ax], -0.5 * ct.variance(code) * x * x);
            }
            if (two) {
                const double cov = ct.covariance(static_cast<std::size_t>(f.codes[0]),
                                                 static_cast<std::size_t>(f.codes[1]));
                const double coef = cov * cs.wealth[0] * cs.wealth[1];
                detail::add_op(trips, c, coef >= 0.0 ? op.cross_pos : op.cross_neg, -coef);
                if (f.into) {
                    detail::add_op(trips, c, *op.into_slope, s);
                    b += s * problem.penalties.into;
                }
                if (f.out) {
                    detail::add_op(trips, c, *op.out_slope, s);
                    b += s * problem.penalties.out;
                }
            }
            rhs[static_cast<Eigen::Index>(c)] = b;
        }
        a.setFromTriplets(trips.begin(), trips.end());
    };

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    bool converged = false;
    double relax = 1.0;
    for (int it = 0; it < cfg.max_policy_iters; ++it) {
        freeze(v);
        assemble();
        if (!pattern_ready) {
            lu.analyzePattern(a);
            pattern_ready = true;
        }
        lu.factorize(a);
        if (lu.info() != Eigen::Success) {
            // pattern may have changed with the active set
            lu.analyzePattern(a);
            lu.factorize(a);
        }
        Eigen::VectorXd next = lu.solve(rhs);
        // One refinement pass; penalized rows are scaled by penalty_scale, so
        // the residual is measured relative to each row's diagonal.
        Eigen::VectorXd res = rhs - a * next;
        next += lu.solve(res);
        res = (rhs - a * next).cwiseQuotient(a.diagonal());
        out.linear_residual = res.lpNorm<Eigen::Infinity>();

        double change = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            change = std::max(change, std::abs(next[static_cast<Eigen::Index>(c)] - v[c]));
        }
        out.history.push_back(change);
        out.iterations = it + 1;
        if (change < cfg.policy_tol) {
            for (std::size_t c = 0; c < n; ++c) v[c] = next[static_cast<Eigen::Index>(c)];
            converged = true;
            break;
        }
        // Where the cross term is not diagonally dominant the scheme is not
        // monotone and the plain iteration can cycle between two policies.
        // Damp the update when the step stops shrinking.
        const std::size_t h = out.history.size();
        if (h > detail::kStallWindow && change > 0.5 * out.history[h - 1 - detail::kStallWindow]) {
            relax = std::max(0.5 * relax, detail::kMinRelax);
        }
        for (std::size_t c = 0; c < n; ++c) {
            v[c] += relax * (next[static_cast<Eigen::Index>(c)] - v[c]);
        }
    }
    if (!converged) throw PolicyIterationDiverged(problem.time, out.history);

    // Report the argmins and constraint gaps of the converged slice.
    out.codes[0].assign(n, 0);
    if (two) out.codes[1].assign(n, 0);
    out.pde_term.assign(n, 0.0);
    if (two) {
        out.into_gap.assign(n, -std::numeric_limits<double>::infinity());
        out.out_gap.assign(n, -std::numeric_limits<double>::infinity());
    }
    std::vector<double> residual(n, 0.0);
    parallel_for(n, [&](std::size_t c) {
        const Stencil st = evaluate(ops[c], v);
        const HamiltonianEval h = hamiltonian_min(cells[c], st, ct);
        out.codes[0][c] = h.codes[0];
        if (two) out.codes[1][c] = h.codes[1];
        out.pde_term[c] = problem.discount * v[c] + (v[c] - older[c]) * inv_dt - h.value;
        if (c == 0) {
            out.pde_term[c] = 0.0;
            return;
        }
        double res = out.pde_term[c];
        if (two) {
            if (st.into_slope) out.into_gap[c] = *st.into_slope - problem.penalties.into;
            if (st.out_slope) out.out_gap[c] = *st.out_slope - problem.penalties.out;
            res += penalty_term(st, problem.penalties, s);
        }
        residual[c] = std::abs(res);
    });
    for (double r : residual) out.max_residual = std::max(out.max_residual, r);
    out.values = std::move(v);
    return out;
}

}  // namespace goalgrid
