#include <gtest/gtest.h>

#include "support.hpp"

using namespace goalgrid;

namespace {

const SolveReport& coarse_solve() {
    static const SolveReport r = solve_all(gg_test::load_shipped("benchmark_rho05_coarse"));
    return r;
}

const OracleResult& coarse_oracle(double dt = 0.25) {
    static std::map<double, OracleResult> cache;
    auto it = cache.find(dt);
    if (it == cache.end()) {
        OracleConfig oc;
        oc.dt = dt;
        it = cache.emplace(dt, dp_value(gg_test::benchmark_market(), gg_test::benchmark_ladder(), oc)).first;
    }
    return it->second;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(TwoPointNoise, MatchesIncrementMoments) {
    const MarketParams m = gg_test::benchmark_market(-0.9);
    const double dt = 0.25;
    const auto out = detail::two_point_noise(m, dt);
    const Matrix2 cov = return_covariance(m);
    double p = 0.0;
    std::array<double, 2> mean{};
    Matrix2 second{};
    for (const auto& o : out) {
        p += o.prob;
        for (int i = 0; i < 2; ++i) {
            mean[i] += o.prob * o.shock[i];
            for (int j = 0; j < 2; ++j) second[i][j] += o.prob * o.shock[i] * o.shock[j];
        }
    }
    EXPECT_NEAR(p, 1.0, 1e-15);
    EXPECT_NEAR(mean[0], 0.0, 1e-15);
    EXPECT_NEAR(mean[1], 0.0, 1e-15);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(second[i][j], cov[i][j] * dt, 1e-15);
}

TEST(DpValue, TerminalLayer) {
    const OracleResult& o = coarse_oracle();
    const std::size_t last = o.last.times.count - 1;
    for (std::size_t i = 0; i < o.last.shape.cells(); ++i) {
        EXPECT_EQ(o.last.at(last, i), std::max(4.0 - o.last.shape.coords(i)[0], 0.0));
    }
}

TEST(DpValue, ZeroWealthCorner) {
    const OracleResult& o = coarse_oracle();
    for (std::size_t k = 0; k < o.two.times.count; ++k) EXPECT_EQ(o.two.at(k, 0), 9.0);
    for (std::size_t k = 0; k < o.last.times.count; ++k) EXPECT_EQ(o.last.at(k, 0), 4.0);
}

TEST(DpValue, MonotoneAndBounded) {
    const OracleResult& o = coarse_oracle();
    const SliceShape& sh = o.two.shape;
    const std::size_t last = sh.axes[0].last();
    for (std::size_t k = 0; k < o.two.times.count; ++k) {
        const auto v = o.two.slice(k);
        for (std::size_t i1 = 0; i1 <= last; ++i1) {
            for (std::size_t i2 = 0; i2 <= last; ++i2) {
                const double x = v[sh.index(i1, i2)];
                ASSERT_GE(x, 0.0);
                ASSERT_LE(x, 9.0);
                if (i1 < last) ASSERT_LE(v[sh.index(i1 + 1, i2)], x + 1e-12);
                if (i2 < last) ASSERT_LE(v[sh.index(i1, i2 + 1)], x + 1e-12);
            }
        }
    }
    for (std::size_t k = 0; k < o.last.times.count; ++k) {
        const auto v = o.last.slice(k);
        for (std::size_t i = 0; i + 1 < v.size(); ++i) ASSERT_LE(v[i + 1], v[i] + 1e-12);
    }
}

TEST(DpValue, BudgetExceeded) {
    OracleConfig oc;
    oc.budget = 1e5;
    try {
        dp_value(gg_test::benchmark_market(), gg_test::benchmark_ladder(), oc);
        FAIL() << "expected BudgetExceeded";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BudgetExceeded);
    }
}

TEST(DpValue, AgreesWithCoarseSolver) {
    const OracleComparison c =
        compare_surfaces(coarse_oracle(), coarse_solve().last.surface, coarse_solve().two.surface);
    EXPECT_LE(c.sup, 0.15);
    EXPECT_EQ(c.oracle_corner, 9.0);
    EXPECT_EQ(c.solver_corner, 9.0);
}

TEST(DpValue, RejectsMismatchedGrids) {
    EXPECT_THROW(compare_surfaces(coarse_oracle(0.125), coarse_solve().last.surface,
                                  coarse_solve().two.surface),
                 Error);
}

// Halving the oracle's time step moves it toward the solver in sup norm, both
// at t = 0 and right after the first deadline.
TEST(DpValue, RefinementApproachesSolver) {
    const SolveReport& pde = coarse_solve();
    const OracleResult& a = coarse_oracle(0.25);
    const OracleResult& b = coarse_oracle(0.125);
    EXPECT_LT(sup_diff(b.two.slice(0), pde.two.surface.slice(0)),
              sup_diff(a.two.slice(0), pde.two.surface.slice(0)));
    EXPECT_LT(sup_diff(b.last.slice(0), pde.last.surface.slice(0)),
              sup_diff(a.last.slice(0), pde.last.surface.slice(0)));
}
