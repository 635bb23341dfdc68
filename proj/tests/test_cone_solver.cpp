#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "cqdenoise/cone_solver.hpp"

using namespace cqdenoise;
using Domain = ConeBuilder::Domain;

TEST(ConeSolver, NonnegMinimumIsZero) {
    ConeBuilder b;
    auto x = b.add_var(Domain::nonneg, "x");
    b.add_objective(x, 1.0);
    auto cp = b.compile();
    auto sol = solve_cone_program(cp.program);
    ASSERT_EQ(sol.status, ConeStatus::optimal);
    EXPECT_NEAR(sol.objective, 0.0, 1e-7);
    EXPECT_NEAR(cp.value(sol, x), 0.0, 1e-7);
}

TEST(ConeSolver, RotatedConeHasNoFactorTwo) {
    ConeBuilder b;
    auto s = b.add_var(Domain::nonneg, "s");
    auto z = b.add_var(Domain::free, "z");
    auto v = b.add_var(Domain::free, "v");
    b.add_eq(LinExpr::var(v), 1.0);
    b.add_eq(LinExpr::var(z), 0.5);
    b.add_rotated_cone(LinExpr::var(s), LinExpr::var(z), {LinExpr::var(v)});
    b.add_objective(s, 1.0);
    auto cp = b.compile();
    auto sol = solve_cone_program(cp.program);
    ASSERT_EQ(sol.status, ConeStatus::optimal);
    EXPECT_NEAR(cp.value(sol, s), 2.0, 1e-7);
    EXPECT_NEAR(sol.objective, 2.0, 1e-7);
}

TEST(ConeSolver, SmallLinearProgram) {
    ConeBuilder b;
    auto x1 = b.add_var(Domain::nonneg);
    auto x2 = b.add_var(Domain::nonneg);
    b.add_eq(LinExpr::var(x1) + LinExpr::var(x2), 1.0);
    b.add_objective(x1, 1.0);
    b.add_objective(x2, 2.0);
    b.add_objective_constant(0.25);
    auto cp = b.compile();
    auto sol = solve_cone_program(cp.program);
    ASSERT_EQ(sol.status, ConeStatus::optimal);
    EXPECT_NEAR(sol.objective, 1.25, 1e-7);
    EXPECT_NEAR(cp.value(sol, x1), 1.0, 1e-6);
}

TEST(ConeSolver, SecondOrderConeNorm) {
    ConeBuilder b;
    auto t = b.add_var(Domain::free);
    auto v1 = b.add_var(Domain::free);
    auto v2 = b.add_var(Domain::free);
    b.add_eq(LinExpr::var(v1), 3.0);
    b.add_eq(LinExpr::var(v2), -4.0);
    b.add_second_order_cone(LinExpr::var(t), {LinExpr::var(v1), LinExpr::var(v2)});
    b.add_objective(t, 1.0);
    auto cp = b.compile();
    auto sol = solve_cone_program(cp.program);
    ASSERT_EQ(sol.status, ConeStatus::optimal);
    EXPECT_NEAR(sol.objective, 5.0, 1e-7);
}

TEST(ConeSolver, DetectsInfeasibility) {
    ConeBuilder b;
    auto x = b.add_var(Domain::nonneg);
    b.add_eq(LinExpr::var(x), -1.0);
    b.add_objective(x, 1.0);
    auto sol = solve_cone_program(b.compile().program);
    EXPECT_EQ(sol.status, ConeStatus::infeasible);
}

TEST(ConeSolver, DetectsUnboundedness) {
    ConeBuilder b;
    auto x = b.add_var(Domain::nonneg);
    b.add_objective(x, -1.0);
    auto sol = solve_cone_program(b.compile().program);
    EXPECT_EQ(sol.status, ConeStatus::unbounded);
}

TEST(ConeSolver, RejectsBadTolerances) {
    ConeBuilder b;
    b.add_objective(b.add_var(Domain::nonneg), 1.0);
    auto cp = b.compile();
    EXPECT_THROW(solve_cone_program(cp.program, 0.0, 1e-8), InvalidInput);
    EXPECT_THROW(solve_cone_program(cp.program, 1e-8, 0.5), InvalidInput);
}

// min ||Mx - r||^2 + 0.1*||x||^2 through rotated-cone epigraphs, checked
// against the normal equations.
TEST(ConeSolver, RegularizedLeastSquaresMatchesNormalEquations) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        const int rows = 8, cols = 5;
        Eigen::MatrixXd M(rows, cols);
        Eigen::VectorXd r(rows);
        for (int i = 0; i < rows; ++i) {
            r[i] = nd(rng);
            for (int j = 0; j < cols; ++j) M(i, j) = nd(rng);
        }
        ConeBuilder b;
        std::vector<std::size_t> x(cols);
        for (auto& v : x) v = b.add_var(Domain::free);
        auto t = b.add_var(Domain::nonneg);
        auto u = b.add_var(Domain::nonneg);
        std::vector<LinExpr> res;
        for (int i = 0; i < rows; ++i) {
            LinExpr e(-r[i]);
            for (int j = 0; j < cols; ++j) e.add(x[j], M(i, j));
            res.push_back(e);
        }
        b.add_rotated_cone(LinExpr::var(t), LinExpr(1.0), res);
        std::vector<LinExpr> xs;
        for (auto v : x) xs.push_back(LinExpr::var(v));
        b.add_rotated_cone(LinExpr::var(u), LinExpr(1.0), xs);
        b.add_objective(t, 1.0);
        b.add_objective(u, 0.1);
        auto cp = b.compile();
        auto sol = solve_cone_program(cp.program);
        ASSERT_EQ(sol.status, ConeStatus::optimal);

        Eigen::MatrixXd N = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(cols, cols);
        Eigen::VectorXd xs_ref = N.ldlt().solve(M.transpose() * r);
        double ref = (M * xs_ref - r).squaredNorm() + 0.1 * xs_ref.squaredNorm();
        EXPECT_NEAR(sol.objective, ref, 1e-6 * (1.0 + ref));
        EXPECT_GE(sol.objective, sol.dual_objective - 1e-8 * (1.0 + std::abs(sol.objective)));
        for (int j = 0; j < cols; ++j) EXPECT_NEAR(cp.value(sol, x[j]), xs_ref[j], 1e-4);

        auto again = solve_cone_program(cp.program);
        EXPECT_NEAR(again.objective, sol.objective, 1e-9);
    }
}

TEST(ConeBuilder, LayoutAndCopies) {
    ConeBuilder b;
    auto a = b.add_var(Domain::nonneg, "a");
    auto f = b.add_var(Domain::free, "f");
    auto n = b.add_var(Domain::nonneg, "n");
    // n sits in a v slot, so it must be copied; a is claimed directly
    b.add_rotated_cone(LinExpr::var(a), LinExpr(1.0), {LinExpr::var(n)});
    auto cp = b.compile();
    const auto& p = cp.program;
    ASSERT_NO_THROW(p.validate());
    ASSERT_EQ(p.cones.size(), 3u);
    EXPECT_EQ(p.cones[0].kind, ConeKind::free);
    EXPECT_EQ(p.cones[1].kind, ConeKind::nonneg);
    EXPECT_EQ(p.cones[2].kind, ConeKind::rotated_second_order);
    EXPECT_EQ(p.cones[2].len, 3u);
    EXPECT_EQ(cp.index[a], p.cones[2].start);
    EXPECT_LT(cp.index[f], p.cones[1].start);
    EXPECT_EQ(p.num_eq_rows, 2u);
}

TEST(ConeProgramDump, RoundTrip) {
    ConeBuilder b;
    auto s = b.add_var(Domain::nonneg, "s");
    auto z = b.add_var(Domain::free, "z");
    auto v = b.add_var(Domain::free, "v");
    b.add_eq(LinExpr::var(v), 1.0);
    b.add_le(LinExpr::var(z), 0.5);
    b.add_rotated_cone(LinExpr::var(s), LinExpr::var(z), {LinExpr::var(v)});
    b.add_objective(s, 1.0);
    b.add_objective_constant(0.1);
    auto p = b.compile().program;
    std::stringstream ss;
    dump_cone_program(p, ss);
    auto q = read_cone_program(ss);
    std::stringstream s2;
    dump_cone_program(q, s2);
    std::stringstream s1;
    dump_cone_program(p, s1);
    EXPECT_EQ(s1.str(), s2.str());
    EXPECT_NEAR(solve_cone_program(q).objective, solve_cone_program(p).objective, 1e-12);
}

TEST(ConeProgram, ValidateRejectsGaps) {
    ConeProgram p;
    p.num_vars = 3;
    p.cones = {{ConeKind::nonneg, 0, 1}, {ConeKind::rotated_second_order, 2, 3}};
    EXPECT_THROW(p.validate(), InvalidInput);
    p.cones = {{ConeKind::second_order, 0, 1}, {ConeKind::free, 1, 2}};
    EXPECT_THROW(p.validate(), InvalidInput);
}
