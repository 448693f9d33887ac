#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "riskalloc/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <sstream>

using namespace riskalloc::sdp;

TEST_CASE("minimize t subject to t >= 1") {
    ConicProgram p;
    auto t = p.add_variable("t");
    p.minimize(LinExpr::variable(t));
    p.add_nonneg(LinExpr::variable(t) - LinExpr(1.0));
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(res.x[t] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("constant negative block is infeasible") {
    ConicProgram p;
    auto t = p.add_variable("t");
    p.minimize(LinExpr::variable(t, 0.0));
    p.add_psd(MatExpr::constant(-Eigen::MatrixXd::Identity(1, 1)));
    p.add_nonneg(LinExpr::variable(t));
    auto res = solve(p);
    CHECK(res.status == SolveStatus::infeasible);
}

TEST_CASE("Lyapunov feasibility: P >= I with A'P + PA <= -I for A = -1") {
    // Scalar inequality -2P <= -1 together with P >= 1, e.g. P = 1 works.
    ConicProgram p;
    auto P = p.add_symmetric("P", 1);
    p.minimize(LinExpr::variable(P(0, 0)));
    MatExpr lyap(1);
    lyap.add(0, 0, LinExpr::variable(P(0, 0), 2.0) - LinExpr(1.0));  // -(A'P+PA) - I >= 0
    p.add_psd(lyap);
    MatExpr lower(1);
    lower.add(0, 0, LinExpr::variable(P(0, 0)) - LinExpr(1.0));
    p.add_psd(lower);
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.x[P(0, 0)] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("2x2 SDP with known optimum") {
    // minimize x s.t. [[x, 1], [1, x]] >= 0  ->  x = 1
    ConicProgram p;
    auto x = p.add_variable("x");
    p.minimize(LinExpr::variable(x));
    MatExpr M(2);
    M.add(0, 0, LinExpr::variable(x));
    M.add(1, 1, LinExpr::variable(x));
    M.add(0, 1, LinExpr(1.0));
    p.add_psd(M);
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unbounded objective is detected") {
    // minimize t with only the upper bound t <= 100
    ConicProgram p;
    auto t = p.add_variable("t");
    p.minimize(LinExpr::variable(t));
    p.add_nonneg(LinExpr(100.0) - LinExpr::variable(t));
    auto res = solve(p);
    CHECK(res.status == SolveStatus::unbounded);
}

TEST_CASE("equalities are eliminated") {
    // minimize x + y s.t. x - y = 2, x >= 3  ->  x=3, y=1
    ConicProgram p;
    auto x = p.add_variable("x");
    auto y = p.add_variable("y");
    p.minimize(LinExpr::variable(x) + LinExpr::variable(y));
    p.add_equality(LinExpr::variable(x) - LinExpr::variable(y) - LinExpr(2.0));
    p.add_nonneg(LinExpr::variable(x) - LinExpr(3.0));
    p.add_nonneg(LinExpr::variable(y));
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.x[x] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(res.x[y] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.objective == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("strictify adds the margin") {
    ConicProgram p;
    auto P = p.add_symmetric("P", 2);
    p.minimize(LinExpr::variable(P(0, 0)) + LinExpr::variable(P(1, 1)));
    p.add_psd(strictify(P.expr(), 1e-3));
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    Eigen::MatrixXd Pv = P.value(res.x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Pv);
    CHECK(es.eigenvalues().minCoeff() >= 1e-3 - 1e-7);

    LinExpr g = strictify(LinExpr::variable(p.add_variable("g")), 1e-6);
    CHECK(g.constant == doctest::Approx(-1e-6));
}

TEST_CASE("nested Schur strictification still certifies the strict LMI") {
    // minimize tr(P) s.t. [P, I; I, 4I] - margin-strictified P block >= 0.
    // Schur: P >= (1/4) I strictly once only P's own block carries a margin.
    ConicProgram p;
    auto P = p.add_symmetric("P", 2);
    p.minimize(LinExpr::variable(P(0, 0)) + LinExpr::variable(P(1, 1)));
    MatExpr big(4);
    for (int r = 0; r < 2; ++r)
        for (int c = r; c < 2; ++c) big.add(r, c, LinExpr::variable(P(r, c)));
    big.add(0, 2, LinExpr(1.0));
    big.add(1, 3, LinExpr(1.0));
    big.add(2, 2, LinExpr(4.0));
    big.add(3, 3, LinExpr(4.0));
    p.add_psd(big);
    p.add_psd(strictify(P.expr(), 1e-6));
    auto res = solve(p);
    REQUIRE(res.status == SolveStatus::optimal);
    Eigen::MatrixXd Pv = P.value(res.x);
    // eigenvalue oracle on the original strict requirement P > 0
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Pv);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(res.objective == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("dump/parse round-trip preserves status and objective") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        ConicProgram p;
        auto X = p.add_symmetric("X", 3);
        auto t = p.add_variable("t");
        Eigen::MatrixXd C = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return unif(rng); });
        C = (C + C.transpose()).eval();
        LinExpr obj = LinExpr::variable(t);
        p.minimize(obj);
        // t I - X >= 0, X - C >= 0: minimal t = lambda_max-ish of C
        MatExpr upper(3);
        for (int r = 0; r < 3; ++r) {
            upper.add(r, r, LinExpr::variable(t));
            for (int c = r; c < 3; ++c) upper.add(r, c, LinExpr::variable(X(r, c), -1.0));
        }
        p.add_psd(upper);
        MatExpr lower(3);
        for (int r = 0; r < 3; ++r)
            for (int c = r; c < 3; ++c)
                lower.add(r, c, LinExpr::variable(X(r, c)) + LinExpr(-C(r, c)));
        p.add_psd(lower);
        p.add_equality(LinExpr::variable(X(0, 1)) - LinExpr::variable(X(1, 2)));

        auto res1 = solve(p);
        std::stringstream buffer;
        p.dump(buffer);
        ConicProgram q = ConicProgram::parse(buffer);
        auto res2 = solve(q);
        REQUIRE(res1.status == res2.status);
        if (res1.status == SolveStatus::optimal)
            CHECK(res1.objective ==
                  doctest::Approx(res2.objective).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("reported complementarity gap is within tolerance at the optimum") {
    ConicProgram p;
    auto x = p.add_variable("x");
    auto y = p.add_variable("y");
    p.minimize(LinExpr::variable(x, 2.0) + LinExpr::variable(y, 3.0));
    MatExpr M(2);
    M.add(0, 0, LinExpr::variable(x) - LinExpr(1.0));
    M.add(1, 1, LinExpr::variable(y) - LinExpr(2.0));
    M.add(0, 1, LinExpr(0.5));
    p.add_psd(M);
    SolveOptions opts;
    opts.tol = 1e-9;
    auto res = solve(p, opts);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.stats.relative_gap <= opts.tol);
    CHECK(res.stats.primal_residual <= opts.tol);
}
