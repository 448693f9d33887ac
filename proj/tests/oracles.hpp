#pragma once

// Test-only independent oracles. These deliberately avoid the SDP path used
// by the implementation under test.

#include "riskalloc/lti_model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace oracles {

// max_omega lambda_max^+( Tp*Tp - g1 Tr*Tr ) over a log frequency grid.
inline double worst_excess(const riskalloc::ClosedLoopSystem& sys,
                           const std::vector<Eigen::MatrixXcd>& Tp,
                           const std::vector<Eigen::MatrixXcd>& Tr, double g1) {
    (void)sys;
    double worst = 0.0;
    for (std::size_t i = 0; i < Tp.size(); ++i) {
        Eigen::MatrixXcd M =
            Tp[i].adjoint() * Tp[i] - g1 * (Tr[i].adjoint() * Tr[i]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
            0.5 * (M + M.adjoint()), Eigen::EigenvaluesOnly);
        worst = std::max(worst, es.eigenvalues().maxCoeff());
    }
    return worst;
}

// Frequency-domain dual of the impact program: the signal-space constraint
// ||yp||^2 <= g1 ||yr||^2 + g2 ||a||^2 holds for all attacks iff pointwise
// in frequency Tp*Tp <= g1 Tr*Tr + g2 I; minimize eps_r*g1 + eps_a*g2 by a
// golden-section search over g1 (the objective is convex in g1).
inline double freq_dual_impact(const riskalloc::ClosedLoopSystem& sys, double eps_r,
                               double eps_a, double g1_hi = 1e5) {
    const int n = sys.n();
    std::vector<Eigen::MatrixXcd> Tp, Tr;
    std::vector<double> omegas;
    omegas.push_back(0.0);
    const int grid = 4000;
    for (int i = 0; i <= grid; ++i)
        omegas.push_back(std::pow(10.0, -4.0 + 9.0 * double(i) / grid));
    for (double w : omegas) {
        Eigen::MatrixXcd M = std::complex<double>(0, w) * Eigen::MatrixXcd::Identity(n, n) -
                             sys.A.cast<std::complex<double>>();
        Eigen::MatrixXcd X = M.partialPivLu().solve(sys.B.cast<std::complex<double>>());
        Tp.push_back(sys.Cp.cast<std::complex<double>>() * X);
        Tr.push_back(sys.Cr.cast<std::complex<double>>() * X);
    }
    auto objective = [&](double g1) {
        return eps_r * g1 + eps_a * worst_excess(sys, Tp, Tr, g1);
    };
    double a = 0.0, b = g1_hi;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
    double f1 = objective(c1), f2 = objective(c2);
    for (int it = 0; it < 120; ++it) {
        if (f1 <= f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = objective(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = objective(c2);
        }
    }
    return std::min({f1, f2, objective(0.0)});
}

// Finite-horizon discretized QCQP oracle:
//   maximize ||y_p||^2 s.t. ||y_r||^2 <= eps_r, ||a||^2 <= eps_a
// over a zero-order-hold grid, solved through the two-multiplier dual with
// lambda_max evaluated by power iteration on the lifted operator.
class DiscretizedQcqp {
  public:
    DiscretizedQcqp(const riskalloc::ClosedLoopSystem& sys, double dt, double horizon)
        : sys_(sys), dt_(dt), steps_(static_cast<int>(horizon / dt)) {
        // exact ZOH discretization via scaling-and-squaring free matrix exp
        const int n = sys.n();
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + sys.nu(), n + sys.nu());
        M.topLeftCorner(n, n) = sys.A * dt;
        M.topRightCorner(n, sys.nu()) = sys.B * dt;
        Eigen::MatrixXd E = expm(M);
        Ad_ = E.topLeftCorner(n, n);
        Bd_ = E.topRightCorner(n, sys.nu());
    }

    // value of the dual with golden search over g1
    double value(double eps_r, double eps_a, double g1_hi = 1e4) const {
        auto objective = [&](double g1) {
            return eps_r * g1 + eps_a * std::max(0.0, lambda_max(g1));
        };
        double a = 0.0, b = g1_hi;
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
        double f1 = objective(c1), f2 = objective(c2);
        for (int it = 0; it < 80; ++it) {
            if (f1 <= f2) {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - phi * (b - a);
                f1 = objective(c1);
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + phi * (b - a);
            f2 = objective(c2);
            }
        }
        return std::min({f1, f2, objective(0.0)});
    }

  private:
    static Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
        // scaling and squaring with a Taylor core; adequate for small dt*A
        int s = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(1.0, M.norm())))) + 4);
        Eigen::MatrixXd X = M / std::pow(2.0, s);
        Eigen::MatrixXd E = Eigen::MatrixXd::Identity(M.rows(), M.cols());
        Eigen::MatrixXd term = E;
        for (int k = 1; k <= 16; ++k) {
            term = (term * X / double(k)).eval();
            E += term;
        }
        for (int i = 0; i < s; ++i) E = (E * E).eval();
        return E;
    }

    // forward map a -> (yp, yr) over the horizon from x0 = 0
    void forward(const std::vector<Eigen::VectorXd>& a, std::vector<Eigen::VectorXd>& yp,
                 std::vector<Eigen::VectorXd>& yr) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(sys_.n());
        yp.resize(steps_);
        yr.resize(steps_);
        for (int k = 0; k < steps_; ++k) {
            yp[k] = sys_.Cp * x;
            yr[k] = sys_.Cr * x;
            x = Ad_ * x + Bd_ * a[k];
        }
    }

    // adjoint of the same map applied to weighted outputs
    std::vector<Eigen::VectorXd> adjoint(const std::vector<Eigen::VectorXd>& wp,
                                         const std::vector<Eigen::VectorXd>& wr) const {
        std::vector<Eigen::VectorXd> out(steps_, Eigen::VectorXd::Zero(sys_.nu()));
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(sys_.n());
        for (int k = steps_ - 1; k >= 0; --k) {
            // x_{k+1} depends on a_k; contribution of outputs at j > k
            out[k] = Bd_.transpose() * lambda;
            lambda = Ad_.transpose() * lambda + sys_.Cp.transpose() * wp[k] +
                     sys_.Cr.transpose() * wr[k];
        }
        return out;
    }

    // Rayleigh quotient iteration helper: one application of the Gram
    // operator G = L* diag(I, -g1 I) L plus an optional shift.
    std::vector<Eigen::VectorXd> apply_gram(const std::vector<Eigen::VectorXd>& a, double g1,
                                            double shift) const {
        std::vector<Eigen::VectorXd> yp, yr;
        forward(a, yp, yr);
        std::vector<Eigen::VectorXd> wp(steps_), wr(steps_);
        for (int k = 0; k < steps_; ++k) {
            wp[k] = yp[k];
            wr[k] = -g1 * yr[k];
        }
        auto out = adjoint(wp, wr);
        if (shift != 0.0)
            for (int k = 0; k < steps_; ++k) out[k] += shift * a[k];
        return out;
    }

    // lambda_max of (Gp - g1*Gr); the continuous-energy ratio equals the
    // discrete Rayleigh quotient (the dt factors cancel). Power iteration
    // with a spectral shift so the rightmost eigenvalue dominates.
    double lambda_max(double g1) const {
        std::vector<Eigen::VectorXd> a(steps_, Eigen::VectorXd::Zero(sys_.nu()));
        std::mt19937_64 rng(12345);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (auto& v : a)
            for (int j = 0; j < v.size(); ++j) v[j] = unif(rng);
        auto normalize = [&](std::vector<Eigen::VectorXd>& v) {
            double norm = 0.0;
            for (const auto& x : v) norm += x.squaredNorm();
            norm = std::sqrt(norm);
            if (norm < 1e-250) return 0.0;
            for (auto& x : v) x /= norm;
            return norm;
        };
        normalize(a);
        // spectral radius estimate
        double radius = 0.0;
        for (int it = 0; it < 60; ++it) {
            auto next = apply_gram(a, g1, 0.0);
            radius = normalize(next);
            if (radius == 0.0) return 0.0;
            a = std::move(next);
        }
        // shifted iteration targets the rightmost eigenvalue
        const double shift = 1.25 * radius;
        double lambda = -shift;
        for (int it = 0; it < 200; ++it) {
            auto next = apply_gram(a, g1, shift);
            double quot = 0.0;
            for (int k = 0; k < steps_; ++k) quot += a[k].dot(next[k]);
            lambda = quot - shift;
            if (normalize(next) == 0.0) return 0.0;
            a = std::move(next);
        }
        return lambda;
    }

    const riskalloc::ClosedLoopSystem sys_;
    double dt_;
    int steps_;
    Eigen::MatrixXd Ad_, Bd_;
};

}  // namespace oracles
