#include <gtest/gtest.h>

#include "support.hpp"

using namespace goalgrid;
using gg_test::benchmark_ladder;
using gg_test::benchmark_market;

TEST(GoalLadder, BenchmarkIsValid) {
    EXPECT_NO_THROW(validate_ladder(benchmark_ladder()));
    EXPECT_NO_THROW(validate_ladder(benchmark_ladder(2.0)));
    EXPECT_DOUBLE_EQ(benchmark_ladder().horizon(), 2.0);
}

TEST(GoalLadder, GoalPortfolioNeedsSomePenalty) {
    GoalLadder l = benchmark_ladder();
    l.goals[0].penalty_in = 0.0;
    l.goals[0].penalty_out = 0.0;
    try {
        validate_ladder(l);
        FAIL() << "expected InvalidLadder";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidLadder);
        EXPECT_EQ(e.where(), "goals.1.penalty_in");
    }
    l.goals[0].penalty_out = 0.1;
    EXPECT_NO_THROW(validate_ladder(l));
}

TEST(GoalLadder, RejectsBadFields) {
    auto expect_bad = [](GoalLadder l, const std::string& where) {
        try {
            validate_ladder(l);
            FAIL() << "expected InvalidLadder at " << where;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidLadder);
            EXPECT_EQ(e.where(), where);
        }
    };
    GoalLadder l = benchmark_ladder();
    l.goals[1].deadline = 1.0;
    expect_bad(l, "goals.2.deadline");
    l = benchmark_ladder();
    l.goals[0].target_amount = 0.0;
    expect_bad(l, "goals.1.target");
    l = benchmark_ladder();
    l.goals[0].weight = -1.0;
    expect_bad(l, "goals.1.weight");
    l = benchmark_ladder();
    l.goals[1].weight = 2.0;
    expect_bad(l, "goals.2.weight");
    l = benchmark_ladder();
    l.goals[0].penalty_out = -0.1;
    expect_bad(l, "goals.1.penalty_out");
    expect_bad(GoalLadder{}, "goals");
}

TEST(MarketParams, Validation) {
    EXPECT_NO_THROW(validate_market(benchmark_market(-0.9)));
    MarketParams m = benchmark_market(1.5);
    EXPECT_THROW(validate_market(m), Error);
    m = benchmark_market();
    m.vol_2 = 0.0;
    EXPECT_THROW(validate_market(m), Error);
    m = benchmark_market();
    m.drifts = {0.2};
    EXPECT_THROW(validate_market(m), Error);
}

TEST(MarketParams, CholeskyReproducesCovariance) {
    for (double rho : {-0.9, 0.0, 0.5, 1.0}) {
        const Matrix2 c = return_covariance(benchmark_market(rho));
        EXPECT_NEAR(c[0][0], 0.09, 1e-15);
        EXPECT_NEAR(c[1][1], 0.16, 1e-15);
        EXPECT_NEAR(c[0][1], rho * 0.12, 1e-15);
        EXPECT_DOUBLE_EQ(c[0][1], c[1][0]);
    }
}

TEST(Allocation, Simplex) {
    EXPECT_NO_THROW(Allocation({0.25, 0.75}));
    EXPECT_NO_THROW(Allocation({0.0, 0.0}));
    EXPECT_THROW(Allocation({-0.1, 0.5}), Error);
    EXPECT_THROW(Allocation({0.6, 0.5}), Error);
}

TEST(TransferDecision, OneLegOnly) {
    EXPECT_DOUBLE_EQ(TransferDecision::into_goal(0.4).net(), 0.4);
    EXPECT_DOUBLE_EQ(TransferDecision::out_of_goal(0.4).net(), -0.4);
    EXPECT_THROW(TransferDecision(0.2, 0.2), Error);
    EXPECT_THROW(TransferDecision(-0.2, 0.0), Error);
}

TEST(SupersolutionBound, SumsWeightedTargets) {
    EXPECT_DOUBLE_EQ(supersolution_bound(benchmark_ladder(), benchmark_market(), 0, 0.0), 9.0);
    EXPECT_DOUBLE_EQ(supersolution_bound(benchmark_ladder(2.0), benchmark_market(), 0, 0.0), 14.0);
    EXPECT_DOUBLE_EQ(supersolution_bound(benchmark_ladder(), benchmark_market(), 1, 1.5), 4.0);
    MarketParams m = benchmark_market();
    m.discount = 0.1;
    EXPECT_NEAR(supersolution_bound(benchmark_ladder(), m, 0, 0.0),
                5.0 * std::exp(-0.1) + 4.0 * std::exp(-0.2), 1e-14);
}
