#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/model.hpp"

namespace goalgrid {

/// Every two-stock allocation on the simplex lattice with spacing `step`,
/// numbered lexicographically by (stock 1, stock 2). With step 0.25 this is
/// the 15-code strategy table: code 4 is (0, 1), code 8 is (0.25, 0.75).
class PolicyGrid {
public:
    PolicyGrid() = default;
    explicit PolicyGrid(double step) : step_(step) {
        const double q = 1.0 / step;
        const double m = std::round(q);
        if (!(step > 0.0) || m < 1.0 || std::abs(q - m) > 1e-9 * m) {
            throw Error(ErrorKind::ValidationError, "allocation step must divide 1",
                        "solver.allocation_step");
        }
        divisions_ = static_cast<int>(m);
        for (int i = 0; i <= divisions_; ++i) {
            for (int j = 0; i + j <= divisions_; ++j) {
                weights_.push_back({i / m, j / m});
            }
        }
    }

    double step() const noexcept { return step_; }
    int divisions() const noexcept { return divisions_; }
    std::size_t size() const noexcept { return weights_.size(); }
    const std::array<double, 2>& weights(std::size_t code) const { return weights_.at(code); }
    Allocation allocation(std::size_t code) const {
        const auto& w = weights_.at(code);
        return Allocation({w[0], w[1]});
    }

    /// Code of the lattice point (i, j) in units of `step`.
    int code(int i, int j) const {
        // codes before row i: sum_{k<i} (divisions - k + 1)
        return i * (divisions_ + 1) - i * (i - 1) / 2 + j;
    }

    friend bool operator==(const PolicyGrid& a, const PolicyGrid& b) {
        return a.divisions_ == b.divisions_;
    }

private:
    double step_ = 0.0;
    int divisions_ = 0;
    std::vector<std::array<double, 2>> weights_;
};

/// Per-allocation coefficients precomputed from the market: excess drift
/// (mu - r)^T a and quadratic forms a^T sigma sigma^T b.
class ControlTable {
public:
    ControlTable(const PolicyGrid& grid, const MarketParams& market)
        : grid_(grid), risk_free_(market.risk_free), cov_(return_covariance(market)) {
        const std::size_t n = grid.size();
        excess_.resize(n);
        variance_.resize(n);
        for (std::size_t a = 0; a < n; ++a) {
            const auto& w = grid.weights(a);
            excess_[a] = (market.drifts[0] - market.risk_free) * w[0] +
                         (market.drifts[1] - market.risk_free) * w[1];
            variance_[a] = quad(w, w);
        }
    }

    const PolicyGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return excess_.size(); }
    double risk_free() const noexcept { return risk_free_; }
    double excess(std::size_t a) const { return excess_[a]; }
    double variance(std::size_t a) const { return variance_[a]; }
    double covariance(std::size_t a, std::size_t b) const {
        return quad(grid_.weights(a), grid_.weights(b));
    }
    const Matrix2& return_cov() const noexcept { return cov_; }

private:
    double quad(const std::array<double, 2>& u, const std::array<double, 2>& v) const {
        return u[0] * (cov_[0][0] * v[0] + cov_[0][1] * v[1]) +
               u[1] * (cov_[1][0] * v[0] + cov_[1][1] * v[1]);
    }

    PolicyGrid grid_;
    double risk_free_;
    Matrix2 cov_;
    std::vector<double> excess_;
    std::vector<double> variance_;
};

/// Entry (i, j) = (a_i x_i)^T sigma sigma^T (a_j x_j) for the two portfolios.
inline Matrix2 covariance_block(const Allocation& a1, const Allocation& a2,
                                const std::array<double, 2>& wealth, const MarketParams& market) {
    const Matrix2 c = return_covariance(market);
    const std::array<std::array<double, 2>, 2> ax{{{a1[0] * wealth[0], a1[1] * wealth[0]},
                                                   {a2[0] * wealth[1], a2[1] * wealth[1]}}};
    Matrix2 out{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) s += ax[i][p] * c[p][q] * ax[j][q];
            out[i][j] = s;
        }
    }
    return out;
}

/// Wealth of each active portfolio at a grid cell. For one active portfolio
/// only wealth[0] is used.
struct CellState {
    std::size_t dims = 1;
    std::array<double, 2> wealth{};
};

struct HamiltonianEval {
    double value = 0.0;
    /// Argmin strategy codes; codes[0] is the goal portfolio in the two-wealth
    /// period and the fundamental portfolio in the one-wealth period.
    std::array<int, 2> codes{};
};

namespace detail {

inline bool improves(double candidate, double best) {
    return candidate < best - 1e-12 * std::max(1.0, std::abs(best));
}

inline double upwind(double drift, std::size_t axis, const Stencil& s) {
    return drift * (drift >= 0.0 ? s.forward[axis] : s.backward[axis]);
}

// Mixed-derivative term with the seven-point difference matching the sign of
// its coefficient.
inline double cross_term(double coef, const Stencil& s) {
    return coef * (coef >= 0.0 ? s.cross_pos : s.cross_neg);
}

}  // namespace detail

/// Discrete controlled generator for fixed codes: drift terms upwinded by
/// the sign of the full drift coefficient, diffusion terms central.
inline double generator(const CellState& cell, const Stencil& s, const ControlTable& ct,
                        std::array<int, 2> codes) {
    const double r = ct.risk_free();
    if (cell.dims == 1) {
        const double x = cell.wealth[0];
        const auto a = static_cast<std::size_t>(codes[0]);
        return detail::upwind((r + ct.excess(a)) * x, 0, s) +
               0.5 * ct.variance(a) * x * x * s.second[0];
    }
    const double x1 = cell.wealth[0];
    const double x2 = cell.wealth[1];
    const auto a1 = static_cast<std::size_t>(codes[0]);
    const auto a2 = static_cast<std::size_t>(codes[1]);
    return detail::upwind((r + ct.excess(a1)) * x1, 0, s) +
           detail::upwind((r + ct.excess(a2)) * x2, 1, s) +
           0.5 * ct.variance(a1) * x1 * x1 * s.second[0] +
           0.5 * ct.variance(a2) * x2 * x2 * s.second[1] +
           detail::cross_term(ct.covariance(a1, a2) * x1 * x2, s);
}

/// Exhaustive minimization of the discrete generator over the policy grid
/// (product grid when two portfolios are active). Ties go to the lowest code.
inline HamiltonianEval hamiltonian_min(const CellState& cell, const Stencil& s,
                                       const ControlTable& ct) {
    const std::size_t n = ct.size();
    const double r = ct.risk_free();
    HamiltonianEval best;
    if (cell.dims == 1) {
        const double x = cell.wealth[0];
        best.value = generator(cell, s, ct, {0, 0});
        for (std::size_t a = 1; a < n; ++a) {
            const double g = detail::upwind((r + ct.excess(a)) * x, 0, s) +
                             0.5 * ct.variance(a) * x * x * s.second[0];
            if (detail::improves(g, best.value)) {
                best.value = g;
                best.codes[0] = static_cast<int>(a);
            }
        }
        return best;
    }

    const double x1 = cell.wealth[0];
    const double x2 = cell.wealth[1];
    std::vector<double> own1(n), own2(n);
    for (std::size_t a = 0; a < n; ++a) {
        own1[a] = detail::upwind((r + ct.excess(a)) * x1, 0, s) +
                  0.5 * ct.variance(a) * x1 * x1 * s.second[0];
        own2[a] = detail::upwind((r + ct.excess(a)) * x2, 1, s) +
                  0.5 * ct.variance(a) * x2 * x2 * s.second[1];
    }
    bool first = true;
    for (std::size_t a1 = 0; a1 < n; ++a1) {
        for (std::size_t a2 = 0; a2 < n; ++a2) {
            const double g =
                own1[a1] + own2[a2] + detail::cross_term(ct.covariance(a1, a2) * x1 * x2, s);
            if (first || detail::improves(g, best.value)) {
                best.value = g;
                best.codes = {static_cast<int>(a1), static_cast<int>(a2)};
                first = false;
            }
        }
    }
    return best;
}

inline HamiltonianEval hamiltonian_min(const CellState& cell, const Stencil& s,
                                       const MarketParams& market, const PolicyGrid& policies) {
    return hamiltonian_min(cell, s, ControlTable(policies, market));
}

struct TransferPenalties {
    double into = 0.0;  // lambda
    double out = 0.0;   // theta
};

/// Penalty contribution scale * [ (d2V - d1V - lambda)^+ + (d1V - d2V - theta)^+ ]
/// with the slopes taken along the transfer rays.
inline double penalty_term(const Stencil& s, TransferPenalties p, double penalty_scale) {
    double out = 0.0;
    if (s.into_slope) out += std::max(*s.into_slope - p.into, 0.0);
    if (s.out_slope) out += std::max(*s.out_slope - p.out, 0.0);
    return penalty_scale * out;
}

/// Residual of the penalized equation at one cell of the implicit step:
/// beta V - dV/dt - H + penalty, with dV/dt = (V_older - V) / dt.
inline double penalized_residual(const CellState& cell, const Stencil& s, double older_value,
                                 double dt, const ControlTable& ct, double discount,
                                 TransferPenalties penalties, double penalty_scale) {
    const double v = s.center;
    const double h = hamiltonian_min(cell, s, ct).value;
    return discount * v + (v - older_value) / dt - h + penalty_term(s, penalties, penalty_scale);
}

}  // namespace goalgrid
