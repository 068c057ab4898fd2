#include <gtest/gtest.h>

#include "support.hpp"

using namespace goalgrid;
using gg_test::solved;

TEST(Coupling, ZeroWealthCorner) {
    const SolveReport& r = solved();
    EXPECT_EQ(r.coupled.values[0], 9.0);
    EXPECT_EQ(r.coupled.plan[0].net(), 0.0);
}

TEST(Coupling, SellBackWhenBothShort) {
    const SolveReport& r = solved();
    const std::size_t c = r.coupled.shape.nearest(1.0, 1.0);
    EXPECT_GT(r.coupled.plan[c].out_of_goal(), 0.0);
    EXPECT_NEAR(r.coupled.post_transfer(c)[1], 2.2, 0.2 + 1e-9);
}

TEST(Coupling, SurplusFillsFundamental) {
    const SolveReport& r = solved();
    const std::size_t c = r.coupled.shape.nearest(8.0, 2.0);
    const auto post = r.coupled.post_transfer(c);
    EXPECT_GE(post[0], 5.0 - 1e-9);
    EXPECT_NEAR(post[1], 4.0, 0.2 + 1e-9);
}

TEST(Coupling, BenchmarkSatisfiesVariationalInequality) {
    for (double rho : {0.5, -0.9}) {
        const SolveReport& r = solved(rho);
        EXPECT_TRUE(verify_coupling_vi(r.coupled, r.config.ladder[0], 1e-9).empty()) << rho;
    }
    const SolveReport& w = solved(0.5, 2.0);
    EXPECT_TRUE(verify_coupling_vi(w.coupled, w.config.ladder[0], 1e-9).empty());
}

TEST(Coupling, InjectedViolationIsReported) {
    CoupledSlice s = solved().coupled;
    const std::size_t c = s.shape.nearest(3.0, 3.0);
    s.values[c] -= 1.0;
    const auto v = verify_coupling_vi(s, solved().config.ladder[0], 1e-9);
    ASSERT_FALSE(v.empty());
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [&](const CouplingViolation& x) { return x.cell == c; }));
}

TEST(Coupling, ImportantGoalLeavesSegments) {
    const SolveReport& r = solved(0.5, 2.0);
    const CoupledSlice& s = r.coupled;
    const double h = s.shape.axes[0].step;
    std::size_t count = 0;
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        const auto x = s.shape.coords(c);
        if (x[0] > 5.0 + 1e-9 || x[1] > 4.0 + 1e-9 || s.plan[c].net() != 0.0) continue;
        ++count;
        const double to_floor = x[1];
        const double to_wall = std::abs(x[0] - 5.0);
        EXPECT_LE(std::min(to_floor, to_wall), h + 1e-9) << x[0] << "," << x[1];
    }
    EXPECT_GT(count, 0u);
}

TEST(Coupling, AffineAlongActiveTransfers) {
    const SolveReport& r = solved();
    const CoupledSlice& s = r.coupled;
    const GoalSpec& g = r.config.ladder[0];
    const double h = s.shape.axes[0].step;
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        const auto m = s.shape.multi(c);
        if (s.plan[c].into_goal() > 0.0) {
            const double next = s.values[s.shape.index(m[0] + 1, m[1] - 1)];
            ASSERT_NEAR(s.values[c], g.penalty_in * h + next, 1e-9);
        }
        if (s.plan[c].out_of_goal() > 0.0) {
            const double next = s.values[s.shape.index(m[0] - 1, m[1] + 1)];
            ASSERT_NEAR(s.values[c], g.penalty_out * h + next, 1e-9);
        }
    }
}

TEST(Coupling, NoProfitableSecondTransfer) {
    const SolveReport& r = solved();
    const CoupledSlice& s = r.coupled;
    const GoalSpec& g = r.config.ladder[0];
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        if (s.plan[c].net() == 0.0) continue;
        const auto post = s.post_transfer(c);
        const std::size_t d = s.shape.nearest(post[0], post[1]);
        EXPECT_EQ(s.plan[d].net(), 0.0) << c;
        const double cost = g.penalty_in * s.plan[c].into_goal() + g.penalty_out * s.plan[c].out_of_goal();
        EXPECT_NEAR(s.values[c], cost + s.values[d], 1e-9);
    }
}

TEST(Coupling, DominatedByStaying) {
    const CoupledSlice& s = solved().coupled;
    for (std::size_t c = 0; c < s.values.size(); ++c) {
        ASSERT_LE(s.values[c], s.no_transfer[c]);
        if (s.plan[c].net() == 0.0) ASSERT_EQ(s.values[c], s.no_transfer[c]);
        else ASSERT_LT(s.values[c], s.no_transfer[c]);
        const auto post = s.post_transfer(c);
        ASSERT_GE(post[0], -1e-12);
        ASSERT_GE(post[1], -1e-12);
    }
}

TEST(Coupling, HandBuiltSlice) {
    // One-goal value falling 4 per unit of fundamental wealth on a tiny axis.
    const AxisGrid ax = make_axis(1.0, 0.5);
    const std::vector<double> next{4.0, 2.0, 0.0};
    const GoalSpec g{1.0, 1.0, 1.0, 0.3, 0.1};
    const CoupledSlice s = couple_at_deadline(next, g, ax);
    // (1, 0): selling everything back costs 0.1 + 1 short + 0.
    EXPECT_DOUBLE_EQ(s.values[s.shape.index(2, 0)], 1.1);
    EXPECT_DOUBLE_EQ(s.plan[s.shape.index(2, 0)].out_of_goal(), 1.0);
    // (0, 1): funding the goal would cost more than it saves.
    EXPECT_DOUBLE_EQ(s.values[s.shape.index(0, 2)], 1.0);
    EXPECT_EQ(s.plan[s.shape.index(0, 2)].net(), 0.0);
    EXPECT_DOUBLE_EQ(s.values[0], 5.0);
    EXPECT_THROW(couple_at_deadline(std::vector<double>{1.0, 2.0}, g, ax), Error);
}
