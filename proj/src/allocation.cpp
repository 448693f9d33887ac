#include "riskalloc/allocation.hpp"

#include "parallel.hpp"
#include "riskalloc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace riskalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sdp::ConicProgram;
using sdp::LinExpr;
using sdp::MatExpr;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

ImpactCertificate impact_of(const ClosedLoopSystem& sys, const AllocationProblem& p) {
    ImpactOptions io;
    io.solver_tol = p.options.solver_tol;
    io.psd_margin = p.options.psd_margin;
    return p.impact == ImpactFunctional::exact ? exact_impact(sys, p.budget, io)
                                               : relaxed_impact(sys, p.budget, io);
}

// Ill-conditioned instances may need a looser tolerance; the solution stays
// a feasible certificate either way.
sdp::SolveOutcome solve_with_retry(const ConicProgram& prog, double tol) {
    sdp::SolveOptions so;
    so.tol = tol;
    sdp::SolveOutcome res = sdp::solve(prog, so);
    for (double widen : {30.0, 1000.0}) {
        if (res.status != sdp::SolveStatus::numerical_failure) break;
        so.tol = tol * widen;
        res = sdp::solve(prog, so);
    }
    return res;
}

// -(C5) rows [np | n | n | nu] for one sample; B_cl columns scaled either by
// fixed mask values or by the shared z variables.
void add_relaxed_block(ConicProgram& prog, const ClosedLoopSystem& sys, const MatrixXd& U,
                       const sdp::SymmetricVar& X, sdp::VarId g1, sdp::VarId g2,
                       const std::vector<sdp::VarId>* zvars) {
    const int n = sys.n(), nu = sys.nu(), np = static_cast<int>(sys.Cp.rows());
    const int o1 = np, o2 = np + n, o3 = np + 2 * n;
    MatExpr M(np + 2 * n + nu);
    for (int i = 0; i < np; ++i) M.add(i, i, LinExpr(1.0));
    for (int i = 0; i < np; ++i)
        for (int b = 0; b < n; ++b) {
            LinExpr cell;
            for (int k = 0; k < n; ++k)
                if (sys.Cp(i, k) != 0.0) cell.add(X(k, b), -sys.Cp(i, k));
            M.add(i, o2 + b, cell);
        }
    for (int i = 0; i < n; ++i) M.add(o1 + i, o1 + i, LinExpr::variable(g1));
    for (int i = 0; i < n; ++i) M.add(o1 + i, o2 + i, LinExpr(-1.0));
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            LinExpr cell;
            for (int k = 0; k < n; ++k) {
                double ca = sys.A(a, k) - U(a, k);
                double cb = sys.A(b, k) - U(b, k);
                if (cb != 0.0) cell.add(X(a, k), -cb);
                if (ca != 0.0) cell.add(X(k, b), -ca);
            }
            M.add(o2 + a, o2 + b, cell);
        }
    for (int a = 0; a < n; ++a)
        for (int j = 0; j < nu; ++j) {
            if (sys.B(a, j) == 0.0) continue;
            if (zvars)
                M.add(o2 + a, o3 + j, LinExpr::variable((*zvars)[j], -sys.B(a, j)));
            else
                M.add(o2 + a, o3 + j, LinExpr(-sys.B(a, j)));
        }
    for (int j = 0; j < nu; ++j) M.add(o3 + j, o3 + j, LinExpr::variable(g2));
    prog.add_psd(M);
}

struct CoupledVars {
    std::vector<sdp::VarId> z;
    sdp::SymmetricVar Z;
    std::vector<sdp::SymmetricVar> X;
    std::vector<sdp::VarId> g1, g2;
};

// Shared constraints of Eq. 16/18/19: per-sample relaxed LMI blocks with the
// z-parameterized attack matrix, plus the lifted binary relaxation
// [Z z; z' 1] >= 0, diag(Z) = z, sum z >= nu - n_w.
CoupledVars build_coupled(ConicProgram& prog, const std::vector<ClosedLoopSystem>& systems,
                          int n_w, double psd_margin) {
    CoupledVars v;
    const int nu = systems.front().nu();
    v.z = prog.add_variables("z", nu);
    v.Z = prog.add_symmetric("Z", nu);

    MatExpr lift(nu + 1);
    for (int r = 0; r < nu; ++r)
        for (int c = r; c < nu; ++c) lift.add(r, c, LinExpr::variable(v.Z(r, c)));
    for (int r = 0; r < nu; ++r) lift.add(r, nu, LinExpr::variable(v.z[r]));
    lift.add(nu, nu, LinExpr(1.0));
    prog.add_psd(lift);
    for (int i = 0; i < nu; ++i) {
        LinExpr diag = LinExpr::variable(v.Z(i, i)) - LinExpr::variable(v.z[i]);
        prog.add_equality(diag);
    }
    LinExpr budget(-double(nu - n_w));
    for (int i = 0; i < nu; ++i) budget.add(v.z[i], 1.0);
    prog.add_nonneg(budget);

    const MatrixXd U = factor_cr(systems.front().Cr);
    for (std::size_t i = 0; i < systems.size(); ++i) {
        auto X = prog.add_symmetric("X" + std::to_string(i), systems[i].n());
        auto g1 = prog.add_variable("g1_" + std::to_string(i));
        auto g2 = prog.add_variable("g2_" + std::to_string(i));
        add_relaxed_block(prog, systems[i], U, X, g1, g2, &v.z);
        prog.add_psd(sdp::strictify(X.expr(), psd_margin));
        prog.add_nonneg(sdp::strictify(LinExpr::variable(g1), psd_margin));
        prog.add_nonneg(LinExpr::variable(g2));
        v.X.push_back(X);
        v.g1.push_back(g1);
        v.g2.push_back(g2);
    }
    return v;
}

AllocationResult finish(const AllocationProblem& problem, AllocationResult res, double t0) {
    res.mask = round_allocation(res.z, problem.n_w);
    res.protected_set = res.mask.protected_set();
    res.achieved_risk = evaluate_mask_risk(problem, res.mask, &res.post_rounding_impacts);
    res.wall_seconds = now_seconds() - t0;
    return res;
}

AllocationResult trivially_all_protected(const AllocationProblem& problem,
                                         const std::string& method, double t0) {
    AllocationResult res;
    res.method = method;
    res.z = VectorXd::Zero(problem.nu());
    return finish(problem, std::move(res), t0);
}

AllocationResult no_protection(const AllocationProblem& problem, const std::string& method,
                               double t0) {
    AllocationResult res;
    res.method = method;
    res.z = VectorXd::Ones(problem.nu());
    return finish(problem, std::move(res), t0);
}

AllocationResult solve_coupled(const AllocationProblem& problem, bool worst_case_objective,
                               const std::string& method) {
    const double t0 = now_seconds();
    problem.validate();
    if (problem.n_w == problem.nu()) return trivially_all_protected(problem, method, t0);
    if (problem.n_w == 0) return no_protection(problem, method, t0);

    const auto& systems = problem.ensemble;
    const int N = static_cast<int>(systems.size());

    ConicProgram prog;
    CoupledVars v = build_coupled(prog, systems, problem.n_w, problem.options.psd_margin);

    if (worst_case_objective) {
        auto t = prog.add_variable("t");
        for (int i = 0; i < N; ++i) {
            LinExpr epi = LinExpr::variable(t) -
                          LinExpr::variable(v.g1[i], problem.budget.eps_r) -
                          LinExpr::variable(v.g2[i], problem.budget.eps_a);
            prog.add_nonneg(epi);
        }
        prog.minimize(LinExpr::variable(t));
    } else {
        auto vv = prog.add_variable("v");
        auto ts = prog.add_variables("t", N);
        const double w = 1.0 / (N * (1.0 - problem.risk.alpha));
        LinExpr obj = LinExpr::variable(vv);
        for (int i = 0; i < N; ++i) {
            obj.add(ts[i], w);
            prog.add_nonneg(LinExpr::variable(ts[i]));
            LinExpr epi = LinExpr::variable(ts[i]) + LinExpr::variable(vv) -
                          LinExpr::variable(v.g1[i], problem.budget.eps_r) -
                          LinExpr::variable(v.g2[i], problem.budget.eps_a);
            prog.add_nonneg(epi);
        }
        prog.minimize(obj);
    }

    sdp::SolveOutcome sol = solve_with_retry(prog, problem.options.solver_tol);
    if (!sol.optimal())
        throw AllocationError(std::string("allocation SDP: ") + sdp::to_string(sol.status));

    AllocationResult res;
    res.method = method;
    res.sdp_objective = sol.objective;
    res.z = VectorXd(problem.nu());
    for (int i = 0; i < problem.nu(); ++i) res.z[i] = sol.x[v.z[i]];
    res.Z = v.Z.value(sol.x);
    return finish(problem, std::move(res), t0);
}

long subset_count(int n, int k) {
    long c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > 100000000L) return c;
    }
    return c;
}

}  // namespace

int AllocationProblem::nu() const {
    if (!ensemble.empty()) return ensemble.front().nu();
    if (nominal) return nominal->nu();
    return 0;
}

void AllocationProblem::validate() const {
    if (ensemble.empty() && !nominal) throw AllocationError("allocation: empty ensemble");
    if (n_w < 0 || n_w > nu()) throw AllocationError("allocation: budget outside [0, n_u]");
    budget.validate();
    risk.validate();
}

ProtectionMask round_allocation(const VectorXd& z, int n_w) {
    const int nu = static_cast<int>(z.size());
    std::vector<int> order(nu);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z[a] < z[b]; });
    ProtectionMask mask = ProtectionMask::all_attackable(nu, n_w);
    for (int i = 0; i < std::min(n_w, nu); ++i) mask.z[order[i]] = 0.0;
    return mask;
}

ClosedLoopSystem apply_mask(const ClosedLoopSystem& sys, const ProtectionMask& mask) {
    ClosedLoopSystem out = sys;
    out.B = sys.B * mask.z.asDiagonal();
    out.mask = mask;
    return out;
}

std::vector<double> masked_impacts(const AllocationProblem& problem,
                                   const ProtectionMask& mask) {
    std::vector<double> values(problem.ensemble.size());
    detail::parallel_for(static_cast<int>(problem.ensemble.size()), problem.options.threads,
                         [&](int i) {
                             values[i] =
                                 impact_of(apply_mask(problem.ensemble[i], mask), problem).value;
                         });
    return values;
}

double evaluate_mask_risk(const AllocationProblem& problem, const ProtectionMask& mask,
                          std::vector<double>* impacts_out) {
    ImpactSampleSet set;
    if (problem.risk.measure == RiskMeasure::nominal) {
        if (!problem.nominal)
            throw AllocationError("allocation: nominal measure requires the nominal system");
        set.nominal_value = impact_of(apply_mask(*problem.nominal, mask), problem).value;
        set.values.push_back(*set.nominal_value);
    } else {
        set.values = masked_impacts(problem, mask);
        for (const auto& sys : problem.ensemble) set.sample_ids.push_back(sys.sample_id);
    }
    if (impacts_out) *impacts_out = set.values;
    return risk_value(problem.risk, set);
}

AllocationResult allocate_cvar_sdp(const AllocationProblem& problem) {
    if (!(problem.risk.alpha > 0.0 && problem.risk.alpha < 1.0))
        throw AllocationError("allocate_cvar_sdp: alpha must lie in (0,1)");
    return solve_coupled(problem, false, "cvar_sdp");
}

AllocationResult allocate_worst_case(const AllocationProblem& problem) {
    return solve_coupled(problem, true, "worst_case_sdp");
}

AllocationResult allocate_nominal(const AllocationProblem& problem) {
    const double t0 = now_seconds();
    problem.validate();
    if (!problem.nominal)
        throw AllocationError("allocate_nominal: nominal system not assembled");
    const std::string method = "nominal_sdp";
    if (problem.n_w == problem.nu()) return trivially_all_protected(problem, method, t0);
    if (problem.n_w == 0) return no_protection(problem, method, t0);

    std::vector<ClosedLoopSystem> single{*problem.nominal};
    ConicProgram prog;
    CoupledVars v = build_coupled(prog, single, problem.n_w, problem.options.psd_margin);
    prog.minimize(LinExpr::variable(v.g1[0], problem.budget.eps_r) +
                  LinExpr::variable(v.g2[0], problem.budget.eps_a));

    sdp::SolveOutcome sol = solve_with_retry(prog, problem.options.solver_tol);
    if (!sol.optimal())
        throw AllocationError(std::string("nominal allocation SDP: ") +
                              sdp::to_string(sol.status));

    AllocationResult res;
    res.method = method;
    res.sdp_objective = sol.objective;
    res.z = VectorXd(problem.nu());
    for (int i = 0; i < problem.nu(); ++i) res.z[i] = sol.x[v.z[i]];
    res.Z = v.Z.value(sol.x);
    return finish(problem, std::move(res), t0);
}

AllocationResult exhaustive_search(const AllocationProblem& problem) {
    const double t0 = now_seconds();
    problem.validate();
    const int nu = problem.nu(), k = problem.n_w;

    long count = subset_count(nu, k);
    if (count > problem.options.exhaustive_cap)
        throw AllocationError("exhaustive_search: " + std::to_string(count) +
                              " subsets exceed the configured cap of " +
                              std::to_string(problem.options.exhaustive_cap));

    // lexicographic k-subsets of {0..nu-1}
    std::vector<std::vector<int>> subsets;
    std::vector<int> comb(k);
    std::iota(comb.begin(), comb.end(), 0);
    for (;;) {
        subsets.push_back(comb);
        int i = k - 1;
        while (i >= 0 && comb[i] == nu - k + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }

    std::vector<double> risks(subsets.size());
    AllocationProblem sequential = problem;
    sequential.options.threads = 1;
    detail::parallel_for(static_cast<int>(subsets.size()), problem.options.threads, [&](int s) {
        risks[s] = evaluate_mask_risk(sequential,
                                      ProtectionMask::from_protected(subsets[s], nu), nullptr);
    });

    std::size_t best = 0;
    for (std::size_t s = 1; s < subsets.size(); ++s)
        if (risks[s] < risks[best]) best = s;

    AllocationResult res;
    res.method = "exhaustive";
    res.z = ProtectionMask::from_protected(subsets[best], nu).z;
    for (std::size_t s = 0; s < subsets.size(); ++s)
        res.scored_subsets.emplace_back(subsets[s], risks[s]);
    return finish(problem, std::move(res), t0);
}

AllocationResult greedy_search(const AllocationProblem& problem) {
    const double t0 = now_seconds();
    problem.validate();
    const int nu = problem.nu();

    std::vector<int> protected_set;
    for (int round = 0; round < problem.n_w; ++round) {
        int best_candidate = -1;
        double best_risk = std::numeric_limits<double>::infinity();
        std::vector<int> candidates;
        for (int i = 0; i < nu; ++i)
            if (std::find(protected_set.begin(), protected_set.end(), i) ==
                protected_set.end())
                candidates.push_back(i);
        std::vector<double> risks(candidates.size());
        AllocationProblem sequential = problem;
        sequential.options.threads = 1;
        detail::parallel_for(
            static_cast<int>(candidates.size()), problem.options.threads, [&](int c) {
                std::vector<int> trial = protected_set;
                trial.push_back(candidates[c]);
                risks[c] = evaluate_mask_risk(sequential,
                                              ProtectionMask::from_protected(trial, nu), nullptr);
            });
        for (std::size_t c = 0; c < candidates.size(); ++c)
            if (risks[c] < best_risk) {
                best_risk = risks[c];
                best_candidate = candidates[c];
            }
        protected_set.push_back(best_candidate);
        std::sort(protected_set.begin(), protected_set.end());
    }

    AllocationResult res;
    res.method = "greedy";
    res.z = ProtectionMask::from_protected(protected_set, nu).z;
    return finish(problem, std::move(res), t0);
}

}  // namespace riskalloc
