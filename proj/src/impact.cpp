#include "riskalloc/impact.hpp"

#include "riskalloc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace riskalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sdp::ConicProgram;
using sdp::LinExpr;
using sdp::MatExpr;
using sdp::SolveStatus;

void ImpactBudget::validate() const {
    if (eps_r <= 0.0 || eps_a <= 0.0)
        throw ConfigError("impact budget: eps_r and eps_a must be positive");
}

namespace {

// W = A'P + PA + Cp'Cp - g1 Cr'Cr and the off-diagonal P*B, entrywise over
// the symmetric variable grid.
void add_exact_block(MatExpr& M, const ClosedLoopSystem& sys, const sdp::SymmetricVar& P,
                     sdp::VarId g1, sdp::VarId g2, double sign) {
    const int n = sys.n(), nu = sys.nu();
    const MatrixXd Gp = sys.Cp.transpose() * sys.Cp;
    const MatrixXd Gr = sys.Cr.transpose() * sys.Cr;
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
            LinExpr cell(sign * Gp(a, b));
            for (int k = 0; k < n; ++k) {
                if (sys.A(k, a) != 0.0) cell.add(P(k, b), sign * sys.A(k, a));
                if (sys.A(k, b) != 0.0) cell.add(P(a, k), sign * sys.A(k, b));
            }
            if (Gr(a, b) != 0.0) cell.add(g1, -sign * Gr(a, b));
            M.add(a, b, cell);
        }
    }
    for (int a = 0; a < n; ++a)
        for (int j = 0; j < nu; ++j) {
            LinExpr cell;
            for (int k = 0; k < n; ++k)
                if (sys.B(k, j) != 0.0) cell.add(P(a, k), sign * sys.B(k, j));
            M.add(a, n + j, cell);
        }
    for (int j = 0; j < nu; ++j) M.add(n + j, n + j, LinExpr::variable(g2, -sign));
}

ImpactCertificate run(ConicProgram& prog, const sdp::SymmetricVar& cert_var, sdp::VarId g1,
                      sdp::VarId g2, CertificateKind kind, const ImpactOptions& options) {
    sdp::SolveOptions so;
    so.tol = options.solver_tol;
    sdp::SolveOutcome res = sdp::solve(prog, so);
    // Near the stability margin these programs get severely ill-conditioned;
    // a looser tolerance still yields a feasible certificate (the value stays
    // a valid bound), so retry before giving up.
    for (double widen : {30.0, 1000.0}) {
        if (res.status != SolveStatus::numerical_failure) break;
        sdp::SolveOptions retry = so;
        retry.tol = options.solver_tol * widen;
        res = sdp::solve(prog, retry);
    }

    ImpactCertificate c;
    c.kind = kind;
    c.status = res.status;
    c.stats = res.stats;
    if (res.status == SolveStatus::infeasible)
        throw UnboundedImpactError(
            "impact SDP infeasible: stealthy unbounded attack exists or assumptions violated");
    if (res.status != SolveStatus::optimal)
        throw SolverError(std::string("impact SDP: ") + sdp::to_string(res.status));

    c.value = res.objective;
    c.gamma1 = res.x[g1];
    c.gamma2 = res.x[g2];
    c.certificate = cert_var.value(res.x);
    c.gamma1_at_lower_bound =
        kind == CertificateKind::relaxed && c.gamma1 <= options.psd_margin * (1.0 + 1e-3);
    return c;
}

}  // namespace

ImpactCertificate exact_impact(const ClosedLoopSystem& sys, const ImpactBudget& budget,
                               const ImpactOptions& options) {
    budget.validate();
    const int n = sys.n(), nu = sys.nu();

    ConicProgram prog;
    auto P = prog.add_symmetric("P", n);
    auto g1 = prog.add_variable("gamma1");
    auto g2 = prog.add_variable("gamma2");
    prog.minimize(LinExpr::variable(g1, budget.eps_r) + LinExpr::variable(g2, budget.eps_a));

    MatExpr block(n + nu);
    add_exact_block(block, sys, P, g1, g2, -1.0);  // -(C3) >= 0
    prog.add_psd(block);
    prog.add_psd(sdp::strictify(P.expr(), options.psd_margin));
    prog.add_nonneg(LinExpr::variable(g1));
    prog.add_nonneg(LinExpr::variable(g2));

    return run(prog, P, g1, g2, CertificateKind::exact, options);
}

ImpactCertificate relaxed_impact(const ClosedLoopSystem& sys, const ImpactBudget& budget,
                                 const ImpactOptions& options) {
    budget.validate();
    const int n = sys.n(), nu = sys.nu(), np = static_cast<int>(sys.Cp.rows());
    const MatrixXd U = factor_cr(sys.Cr);

    ConicProgram prog;
    auto X = prog.add_symmetric("X", n);
    auto g1 = prog.add_variable("gamma1");
    auto g2 = prog.add_variable("gamma2");
    prog.minimize(LinExpr::variable(g1, budget.eps_r) + LinExpr::variable(g2, budget.eps_a));

    // -(C4) >= 0 with row blocks [np | n | n | nu]
    const int o1 = np, o2 = np + n, o3 = np + 2 * n;
    MatExpr M(np + 2 * n + nu);
    for (int i = 0; i < np; ++i) M.add(i, i, LinExpr(1.0));
    for (int i = 0; i < np; ++i)
        for (int b = 0; b < n; ++b) {
            LinExpr cell;  // -(Cp X)(i,b)
            for (int k = 0; k < n; ++k)
                if (sys.Cp(i, k) != 0.0) cell.add(X(k, b), -sys.Cp(i, k));
            M.add(i, o2 + b, cell);
        }
    for (int i = 0; i < n; ++i) M.add(o1 + i, o1 + i, LinExpr::variable(g1));
    for (int i = 0; i < n; ++i) M.add(o1 + i, o2 + i, LinExpr(-1.0));
    // -(W2) = -(X A' + A X - X U' - U X)
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
        for (int j = 0; j < nu; ++j)
            if (sys.B(a, j) != 0.0) M.add(o2 + a, o3 + j, LinExpr(-sys.B(a, j)));
    for (int j = 0; j < nu; ++j) M.add(o3 + j, o3 + j, LinExpr::variable(g2));
    prog.add_psd(M);

    prog.add_psd(sdp::strictify(X.expr(), options.psd_margin));
    // gamma1 enters the relaxation through its reciprocal
    prog.add_nonneg(sdp::strictify(LinExpr::variable(g1), options.psd_margin));
    prog.add_nonneg(LinExpr::variable(g2));

    return run(prog, X, g1, g2, CertificateKind::relaxed, options);
}

Eigen::MatrixXd factor_cr(const Eigen::MatrixXd& Cr) {
    const int n = static_cast<int>(Cr.cols());
    MatrixXd G = Cr.transpose() * Cr;
    const double scale = std::max(1.0, G.diagonal().cwiseAbs().maxCoeff());
    MatrixXd U = MatrixXd::Zero(n, n);
    MatrixXd S = G;
    for (int i = 0; i < n; ++i) {
        double pivot = S(i, i);
        if (pivot > 1e-12 * scale) {
            double r = std::sqrt(pivot);
            U.row(i).tail(n - i) = S.row(i).tail(n - i) / r;
            S.bottomRightCorner(n - i, n - i).noalias() -=
                U.row(i).tail(n - i).transpose() * U.row(i).tail(n - i);
        }
    }
    return U;
}

namespace {

// Pointwise generalized max eigenvalue of (Tp*Tp, Tr*Tr) restricted to the
// active attack columns; infinite when the detection Gram loses rank.
double gain_ratio_at(const ClosedLoopSystem& sys, const MatrixXd& Bact, double omega) {
    const int n = sys.n();
    Eigen::MatrixXcd M = std::complex<double>(0.0, omega) * Eigen::MatrixXcd::Identity(n, n) -
                         sys.A.cast<std::complex<double>>();
    Eigen::MatrixXcd Xc = M.partialPivLu().solve(Bact.cast<std::complex<double>>());
    Eigen::MatrixXcd Yp = sys.Cp.cast<std::complex<double>>() * Xc;
    Eigen::MatrixXcd Yr = sys.Cr.cast<std::complex<double>>() * Xc;
    Eigen::MatrixXcd Gp = Yp.adjoint() * Yp;
    Eigen::MatrixXcd Gr = Yr.adjoint() * Yr;
    if (Bact.cols() == 1) {
        double gr = Gr(0, 0).real();
        double gp = Gp(0, 0).real();
        if (gr <= 1e-300) return gp > 1e-300 ? std::numeric_limits<double>::infinity() : 0.0;
        return gp / gr;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> er(Gr);
    double lmin = er.eigenvalues().minCoeff();
    double lmax = er.eigenvalues().maxCoeff();
    if (lmin <= 1e-14 * std::max(lmax, 1e-300))
        return std::numeric_limits<double>::infinity();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(Gp, Gr,
                                                                   Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    return ges.eigenvalues().maxCoeff();
}

}  // namespace

double oog(const ClosedLoopSystem& sys) {
    if (!is_hurwitz(sys.A)) throw ModelError("oog: closed loop is not stable");

    // Restrict to columns the mask leaves attackable.
    std::vector<int> active;
    for (int j = 0; j < sys.nu(); ++j)
        if (sys.B.col(j).cwiseAbs().maxCoeff() > 0.0) active.push_back(j);
    if (active.empty()) return 0.0;
    MatrixXd Bact(sys.n(), active.size());
    for (size_t j = 0; j < active.size(); ++j) Bact.col(j) = sys.B.col(active[j]);

    const int grid = 3000;
    std::vector<double> omegas;
    omegas.push_back(0.0);
    for (int i = 0; i <= grid; ++i)
        omegas.push_back(std::pow(10.0, -4.0 + 9.0 * double(i) / grid));

    double best = 0.0, best_omega = 0.0;
    for (double w : omegas) {
        double r = gain_ratio_at(sys, Bact, w);
        if (std::isinf(r))
            throw UnboundedImpactError("oog: detection output loses rank, gain unbounded");
        if (r > best) {
            best = r;
            best_omega = w;
        }
    }
    // local refinement on a log grid around the best frequency
    double lo = best_omega > 0 ? best_omega / 3.0 : 0.0;
    double hi = best_omega > 0 ? best_omega * 3.0 : omegas[1];
    for (int pass = 0; pass < 60; ++pass) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        double r1 = gain_ratio_at(sys, Bact, m1), r2 = gain_ratio_at(sys, Bact, m2);
        best = std::max({best, r1, r2});
        if (r1 < r2)
            lo = m1;
        else
            hi = m2;
    }
    return best;
}

double hinf(const ClosedLoopSystem& sys, double rel_tol) {
    if (!is_hurwitz(sys.A)) throw ModelError("hinf: closed loop is not stable");
    const int n = sys.n(), nu = sys.nu();
    const MatrixXd GpC = sys.Cp.transpose() * sys.Cp;

    // Feasibility of the bounded-real LMI at gain-squared g, decided through
    // the always-feasible epigraph  min t : BRL(g) <= t I.
    auto margin_at = [&](double g) {
        ConicProgram prog;
        auto P = prog.add_symmetric("P", n);
        auto t = prog.add_variable("t");
        prog.minimize(LinExpr::variable(t));
        MatExpr M(n + nu);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                LinExpr cell(-GpC(a, b));
                for (int k = 0; k < n; ++k) {
                    if (sys.A(k, a) != 0.0) cell.add(P(k, b), -sys.A(k, a));
                    if (sys.A(k, b) != 0.0) cell.add(P(a, k), -sys.A(k, b));
                }
                if (a == b) cell.add(t, 1.0);
                M.add(a, b, cell);
            }
        for (int a = 0; a < n; ++a)
            for (int j = 0; j < nu; ++j) {
                LinExpr cell;
                for (int k = 0; k < n; ++k)
                    if (sys.B(k, j) != 0.0) cell.add(P(a, k), -sys.B(k, j));
                M.add(a, n + j, cell);
            }
        for (int j = 0; j < nu; ++j) {
            LinExpr cell(g);
            cell.add(t, 1.0);
            M.add(n + j, n + j, cell);
        }
        prog.add_psd(M);
        prog.add_psd(sdp::strictify(P.expr(), 1e-9));
        sdp::SolveOptions so;
        so.tol = 1e-9;
        auto res = sdp::solve(prog, so);
        if (!res.optimal()) throw SolverError("hinf feasibility subproblem failed");
        return res.objective;
    };

    if (sys.B.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    double hi = 1.0;
    while (margin_at(hi) > 0.0) {
        hi *= 4.0;
        if (hi > 1e16) throw SolverError("hinf: no finite upper bound found");
    }
    double lo = 0.0;
    while ((hi - lo) > rel_tol * std::max(1.0, hi)) {
        double mid = 0.5 * (lo + hi);
        if (margin_at(mid) <= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace riskalloc
