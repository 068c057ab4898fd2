#pragma once

// Domain types shared by every solver stage. Currency is in thousands of
// dollars and time in years throughout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "goalgrid/error.hpp"

namespace goalgrid {

/// One investment goal: reach `target_amount` by `deadline`.
///
/// `penalty_in` is the mental cost per unit moved from the fundamental
/// portfolio into this goal, `penalty_out` per unit moved back.
struct GoalSpec {
    double target_amount = 0.0;
    double deadline = 0.0;
    double weight = 1.0;
    double penalty_in = 0.0;
    double penalty_out = 0.0;

    friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

/// Goals ordered by deadline. The last entry is the fundamental goal, which
/// every transfer routes through.
struct GoalLadder {
    std::vector<GoalSpec> goals;

    std::size_t size() const noexcept { return goals.size(); }
    const GoalSpec& operator[](std::size_t k) const { return goals.at(k); }
    const GoalSpec& fundamental() const { return goals.back(); }
    double horizon() const { return goals.back().deadline; }

    friend bool operator==(const GoalLadder&, const GoalLadder&) = default;
};

struct MarketParams {
    double risk_free = 0.0;
    double discount = 0.0;
    std::vector<double> drifts;
    double vol_1 = 0.0;
    double vol_2 = 0.0;
    double correlation = 0.0;

    friend bool operator==(const MarketParams&, const MarketParams&) = default;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Stock proportions for one portfolio; must lie in the no-short,
/// no-borrow simplex.
class Allocation {
public:
    Allocation() = default;
    explicit Allocation(std::vector<double> weights) : weights_(std::move(weights)) {
        double sum = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!(weights_[i] >= -kTol)) {
                throw Error(ErrorKind::InvalidAllocation, "negative stock proportion",
                            "weights." + std::to_string(i));
            }
            sum += weights_[i];
        }
        if (sum > 1.0 + kTol) {
            throw Error(ErrorKind::InvalidAllocation, "proportions sum above one");
        }
    }

    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_.at(i); }

    friend bool operator==(const Allocation&, const Allocation&) = default;

private:
    static constexpr double kTol = 1e-12;
    std::vector<double> weights_;
};

/// Instantaneous transfer between a goal portfolio and the fundamental one.
/// Paying both penalties at once is dominated, so at most one leg is nonzero.
class TransferDecision {
public:
    TransferDecision() = default;
    TransferDecision(double into_goal, double out_of_goal)
        : into_(into_goal), out_(out_of_goal) {
        if (into_ < 0.0 || out_ < 0.0) {
            throw Error(ErrorKind::InvalidTransfer, "transfer amounts must be nonnegative");
        }
        if (into_ > 0.0 && out_ > 0.0) {
            throw Error(ErrorKind::InvalidTransfer, "both transfer legs positive");
        }
    }

    static TransferDecision none() { return {}; }
    static TransferDecision into_goal(double amount) { return {amount, 0.0}; }
    static TransferDecision out_of_goal(double amount) { return {0.0, amount}; }

    double into_goal() const noexcept { return into_; }
    double out_of_goal() const noexcept { return out_; }
    /// Net change of the goal portfolio.
    double net() const noexcept { return into_ - out_; }

    friend bool operator==(const TransferDecision&, const TransferDecision&) = default;

private:
    double into_ = 0.0;
    double out_ = 0.0;
};

/// Returns the ladder unchanged or throws InvalidLadder naming the field.
inline const GoalLadder& validate_ladder(const GoalLadder& ladder) {
    if (ladder.goals.empty()) {
        throw Error(ErrorKind::InvalidLadder, "ladder has no goals", "goals");
    }
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        const GoalSpec& g = ladder.goals[k];
        const std::string path = "goals." + std::to_string(k + 1);
        if (!(g.target_amount > 0.0)) {
            throw Error(ErrorKind::InvalidLadder, "target must be positive", path + ".target");
        }
        if (!(g.deadline > 0.0)) {
            throw Error(ErrorKind::InvalidLadder, "deadline must be positive", path + ".deadline");
        }
        if (!(g.weight >= 0.0)) {
            throw Error(ErrorKind::InvalidLadder, "weight must be nonnegative", path + ".weight");
        }
        if (!(g.penalty_in >= 0.0)) {
            throw Error(ErrorKind::InvalidLadder, "penalty must be nonnegative",
                        path + ".penalty_in");
        }
        if (!(g.penalty_out >= 0.0)) {
            throw Error(ErrorKind::InvalidLadder, "penalty must be nonnegative",
                        path + ".penalty_out");
        }
        if (k > 0 && !(g.deadline > ladder.goals[k - 1].deadline)) {
            throw Error(ErrorKind::InvalidLadder, "deadlines must be strictly increasing",
                        path + ".deadline");
        }
        const bool fundamental = k + 1 == ladder.size();
        if (!fundamental && !(g.penalty_in + g.penalty_out > 0.0)) {
            throw Error(ErrorKind::InvalidLadder,
                        "penalty_in + penalty_out must be positive for a goal portfolio",
                        path + ".penalty_in");
        }
        if (fundamental && g.weight != 1.0) {
            throw Error(ErrorKind::InvalidLadder, "fundamental goal weight is fixed at 1.0",
                        path + ".weight");
        }
    }
    return ladder;
}

inline const MarketParams& validate_market(const MarketParams& market) {
    if (market.drifts.size() != 2) {
        throw Error(ErrorKind::InvalidMarket, "exactly two stock drifts are supported",
                    "market.drifts");
    }
    if (!(market.vol_1 > 0.0)) {
        throw Error(ErrorKind::InvalidMarket, "volatility must be positive", "market.vol_1");
    }
    if (!(market.vol_2 > 0.0)) {
        throw Error(ErrorKind::InvalidMarket, "volatility must be positive", "market.vol_2");
    }
    if (!(std::abs(market.correlation) <= 1.0)) {
        throw Error(ErrorKind::InvalidMarket, "correlation outside [-1, 1]",
                    "market.correlation");
    }
    if (!(market.discount >= 0.0)) {
        throw Error(ErrorKind::InvalidMarket, "discount rate must be nonnegative",
                    "market.discount");
    }
    return market;
}

/// Lower-triangular volatility matrix whose product with its transpose is the
/// return covariance.
inline Matrix2 cholesky_vol(const MarketParams& market) {
    const double rho = market.correlation;
    return Matrix2{{{market.vol_1, 0.0},
                    {rho * market.vol_2, std::sqrt(std::max(0.0, 1.0 - rho * rho)) * market.vol_2}}};
}

/// sigma * sigma^T.
inline Matrix2 return_covariance(const MarketParams& market) {
    const Matrix2 s = cholesky_vol(market);
    Matrix2 c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            c[i][j] = s[i][0] * s[j][0] + s[i][1] * s[j][1];
    return c;
}

/// Cost of doing nothing from time t onward with zero wealth in every active
/// portfolio: sum over goals k.. of w_i e^{-beta (T_i - t)} G_i. Every value
/// function is bounded above by it.
inline double supersolution_bound(const GoalLadder& ladder, const MarketParams& market,
                                  std::size_t first_active, double t) {
    double total = 0.0;
    for (std::size_t i = first_active; i < ladder.size(); ++i) {
        const GoalSpec& g = ladder.goals[i];
        total += g.weight * std::exp(-market.discount * (g.deadline - t)) * g.target_amount;
    }
    return total;
}

}  // namespace goalgrid
