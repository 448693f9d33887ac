#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "riskalloc/allocation.hpp"
#include "riskalloc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>
#include <random>

using namespace riskalloc;

namespace {

// Random stable synthetic plant with attack on every channel.
AllocationProblem random_problem(std::uint64_t seed, int n, int N, int n_w,
                                 double alpha = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd R = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return unif(rng); });
    Eigen::MatrixXd A = R - (R.eigenvalues().real().maxCoeff() + 0.8) *
                                Eigen::MatrixXd::Identity(n, n);
    DirectClosedLoop dcl;
    dcl.A = A;
    dcl.delta_entries = {{0, 0, n - 1, 1.0}};
    dcl.B = Eigen::MatrixXd::Identity(n, n);
    dcl.Cp = Eigen::MatrixXd::NullaryExpr(1, n, [&] { return unif(rng); });
    dcl.Cr = Eigen::MatrixXd::NullaryExpr(1, n, [&] { return unif(rng); });

    PlantEnsemble model;
    model.model = dcl;
    model.uncertainty.lower = Eigen::VectorXd::Constant(1, -0.2);
    model.uncertainty.upper = Eigen::VectorXd::Constant(1, 0.2);
    model.uncertainty.seed = seed + 1;

    AllocationProblem p;
    int id = 0;
    for (const auto& d : sample_uncertainties(model.uncertainty, N))
        p.ensemble.push_back(model.assemble(ProtectionMask::all_attackable(n), d, id++));
    p.nominal = model.assemble(ProtectionMask::all_attackable(n), Eigen::VectorXd::Zero(1));
    p.n_w = n_w;
    p.budget = {1.0, 10.0};
    p.risk = {RiskMeasure::cvar, alpha};
    p.impact = ImpactFunctional::relaxed;
    return p;
}

}  // namespace

TEST_CASE("rounding protects the n_w smallest entries with index tie-break") {
    Eigen::VectorXd z(4);
    z << 0.2, 0.9, 0.2, 0.7;
    auto mask = round_allocation(z, 2);
    CHECK(mask.protected_set() == std::vector<int>{0, 2});

    Eigen::VectorXd binary(4);
    binary << 1, 0, 1, 0;
    CHECK(round_allocation(binary, 2).protected_set() == std::vector<int>{1, 3});
}

TEST_CASE("rounding equals the argsort prefix on random vectors") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int nu = 2 + static_cast<int>(rng() % 7);
        const int n_w = static_cast<int>(rng() % (nu + 1));
        Eigen::VectorXd z =
            Eigen::VectorXd::NullaryExpr(nu, [&] { return unif(rng); });
        std::vector<int> order(nu);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return z[a] < z[b]; });
        std::vector<int> expected(order.begin(), order.begin() + n_w);
        std::sort(expected.begin(), expected.end());
        CHECK(round_allocation(z, n_w).protected_set() == expected);
    }
}

TEST_CASE("full budget protects everything without solving") {
    auto problem = random_problem(41, 3, 3, 3);
    problem.impact = ImpactFunctional::exact;
    auto res = allocate_cvar_sdp(problem);
    CHECK(res.protected_set == std::vector<int>{0, 1, 2});
    CHECK(res.achieved_risk < 1e-4);
    CHECK(std::isnan(res.sdp_objective));
}

TEST_CASE("zero budget protects nothing") {
    auto problem = random_problem(42, 3, 3, 0);
    for (auto* run : {&allocate_cvar_sdp, &allocate_worst_case}) {
        auto res = (*run)(problem);
        CHECK(res.protected_set.empty());
        CHECK((res.z.array() == 1.0).all());
    }
}

TEST_CASE("coupled SDP returns z in the box with the budget satisfied") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        auto problem = random_problem(seed, 3, 4, 1);
        auto res = allocate_cvar_sdp(problem);
        REQUIRE(res.z.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(res.z[i] >= -1e-6);
            CHECK(res.z[i] <= 1.0 + 1e-6);
        }
        CHECK(res.z.sum() >= 3 - 1 - 1e-6);
        CHECK(static_cast<int>(res.protected_set.size()) == 1);
        CHECK(res.post_rounding_impacts.size() == problem.ensemble.size());

        // rank-1 lifted matrix certifies a binary relaxation
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.Z);
        const auto& ev = es.eigenvalues();
        if (ev[ev.size() - 2] <= 1e-6 * ev[ev.size() - 1]) {
            for (int i = 0; i < res.z.size(); ++i)
                CHECK(std::min(res.z[i], 1.0 - res.z[i]) <= 1e-5);
        }
    }
}

TEST_CASE("worst-case epigraph is tight at the relaxed optimum") {
    auto problem = random_problem(7, 3, 4, 1);
    auto res = allocate_worst_case(problem);
    ProtectionMask relaxed_mask = ProtectionMask::all_attackable(3);
    relaxed_mask.z = res.z;
    double worst = 0.0;
    for (const auto& sys : problem.ensemble)
        worst = std::max(worst,
                         relaxed_impact(apply_mask(sys, relaxed_mask), problem.budget).value);
    CHECK(res.sdp_objective == doctest::Approx(worst).epsilon(1e-4));
}

TEST_CASE("single-sample worst case coincides with the nominal SDP") {
    auto problem = random_problem(11, 3, 1, 1);
    problem.nominal = problem.ensemble.front();  // delta_1 as the nominal
    auto wc = allocate_worst_case(problem);
    auto nom = allocate_nominal(problem);
    CHECK(wc.protected_set == nom.protected_set);
    CHECK(wc.sdp_objective == doctest::Approx(nom.sdp_objective).epsilon(1e-4));
}

TEST_CASE("degenerate single-sample cvar coincides with the nominal SDP") {
    auto problem = random_problem(13, 3, 1, 1, 0.37);
    problem.ensemble.front() = *problem.nominal;  // ensemble = {delta = 0}
    auto cv = allocate_cvar_sdp(problem);
    auto nom = allocate_nominal(problem);
    CHECK(cv.protected_set == nom.protected_set);
}

TEST_CASE("exhaustive search scores every subset and wins the dominance chain") {
    auto problem = random_problem(17, 3, 4, 2);
    auto ex = exhaustive_search(problem);
    CHECK(ex.scored_subsets.size() == 3);  // C(3,2)
    auto gr = greedy_search(problem);
    auto sdp = allocate_cvar_sdp(problem);
    CHECK(ex.achieved_risk <= gr.achieved_risk + 1e-9);
    CHECK(ex.achieved_risk <= sdp.achieved_risk + 1e-9);
}

TEST_CASE("greedy with a budget of one equals exhaustive") {
    auto problem = random_problem(19, 4, 3, 1);
    auto ex = exhaustive_search(problem);
    auto gr = greedy_search(problem);
    CHECK(ex.protected_set == gr.protected_set);
}

TEST_CASE("exhaustive search refuses oversized enumerations") {
    auto problem = random_problem(23, 3, 2, 1);
    problem.options.exhaustive_cap = 2;  // C(3,1) = 3 > 2
    CHECK_THROWS_AS(exhaustive_search(problem), AllocationError);
}

TEST_CASE("threaded evaluation matches sequential results") {
    auto problem = random_problem(29, 3, 6, 1);
    auto seq = exhaustive_search(problem);
    problem.options.threads = 2;
    auto par = exhaustive_search(problem);
    CHECK(seq.protected_set == par.protected_set);
    REQUIRE(seq.scored_subsets.size() == par.scored_subsets.size());
    for (std::size_t i = 0; i < seq.scored_subsets.size(); ++i)
        CHECK(seq.scored_subsets[i].second ==
              doctest::Approx(par.scored_subsets[i].second).epsilon(1e-12));
}

TEST_CASE("invalid problems are rejected") {
    auto problem = random_problem(31, 3, 2, 1);
    problem.n_w = 5;
    CHECK_THROWS_AS(allocate_cvar_sdp(problem), AllocationError);
    problem.n_w = 1;
    problem.risk.alpha = 1.0;
    CHECK_THROWS_AS(allocate_cvar_sdp(problem), AllocationError);
}
