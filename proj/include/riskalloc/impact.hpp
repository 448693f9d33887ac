#pragma once

#include "riskalloc/lti_model.hpp"
#include "riskalloc/sdp.hpp"

#include <Eigen/Dense>

// Attack impact of a closed-loop system: the supremum of performance-output
// energy a stealthy, energy-bounded attacker can cause. Computed exactly by
// the dissipativity dual SDP, or as a convex-in-z upper bound through the
// Young-relation relaxed LMI.

namespace riskalloc {

struct ImpactBudget {
    double eps_r = 1.0;  // detection energy threshold
    double eps_a = 1.0;  // attack energy budget

    void validate() const;
};

enum class CertificateKind { exact, relaxed };

struct ImpactCertificate {
    double value = 0.0;      // eps_r*gamma1 + eps_a*gamma2
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    Eigen::MatrixXd certificate;  // P for the exact SDP, X for the relaxed one
    CertificateKind kind = CertificateKind::exact;
    sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
    sdp::SolveStats stats;
    // The relaxed program bounds gamma1 away from zero (the Young term uses
    // 1/gamma1); set when that bound is active at the optimum.
    bool gamma1_at_lower_bound = false;
};

struct ImpactOptions {
    double solver_tol = 1e-8;
    double psd_margin = 1e-6;
};

ImpactCertificate exact_impact(const ClosedLoopSystem& sys, const ImpactBudget& budget,
                               const ImpactOptions& options = {});

ImpactCertificate relaxed_impact(const ClosedLoopSystem& sys, const ImpactBudget& budget,
                                 const ImpactOptions& options = {});

// Square factor U with U'U = Cr'Cr, square n x n. Unpivoted outer-product
// Cholesky of the (usually rank-deficient) Gram matrix; pivots below
// 1e-12 * scale produce zero rows.
Eigen::MatrixXd factor_cr(const Eigen::MatrixXd& Cr);

// Output-to-output gain: limit of the impact per unit detection budget as
// the attack-energy constraint vanishes. Frequency-domain computation.
double oog(const ClosedLoopSystem& sys);

// Squared H-infinity gain of the attack-to-performance channel: limit of the
// impact per unit attack budget as the stealthiness constraint vanishes.
// Bisection on the bounded-real LMI.
double hinf(const ClosedLoopSystem& sys, double rel_tol = 1e-7);

}  // namespace riskalloc
