#pragma once

#include "riskalloc/impact.hpp"
#include "riskalloc/lti_model.hpp"
#include "riskalloc/risk.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

// Choosing which n_w actuators to protect: the coupled rank-relaxed CVaR
// allocation SDP with order-statistic rounding, its worst-case and nominal
// variants, and exhaustive / greedy search baselines.

namespace riskalloc {

enum class ImpactFunctional { exact, relaxed };

struct AllocationOptions {
    double solver_tol = 1e-8;
    double psd_margin = 1e-6;
    long exhaustive_cap = 100000;
    int threads = 1;
};

struct AllocationProblem {
    // Assembled with the all-attackable mask; B_cl is linear in z so masks
    // are applied by column scaling.
    std::vector<ClosedLoopSystem> ensemble;
    // Nominal (delta = 0) system, required by allocate_nominal and by the
    // nominal risk measure.
    std::optional<ClosedLoopSystem> nominal;
    int n_w = 0;
    ImpactBudget budget;
    RiskConfig risk;
    ImpactFunctional impact = ImpactFunctional::relaxed;
    AllocationOptions options;

    int nu() const;
    void validate() const;
};

struct AllocationResult {
    std::vector<int> protected_set;
    Eigen::VectorXd z;            // relaxed z* (binary for search methods)
    Eigen::MatrixXd Z;            // lifted matrix from the SDP, when present
    ProtectionMask mask;          // rounded binary mask
    double achieved_risk = 0.0;   // re-evaluated risk of the rounded mask
    double sdp_objective = std::numeric_limits<double>::quiet_NaN();
    std::string method;
    double wall_seconds = 0.0;
    std::vector<double> post_rounding_impacts;
    // Exhaustive search: every evaluated subset with its risk.
    std::vector<std::pair<std::vector<int>, double>> scored_subsets;
};

// Eq-17 rounding: protect the n_w smallest entries, ties to the lowest index.
ProtectionMask round_allocation(const Eigen::VectorXd& z, int n_w);

AllocationResult allocate_cvar_sdp(const AllocationProblem& problem);
AllocationResult allocate_worst_case(const AllocationProblem& problem);
AllocationResult allocate_nominal(const AllocationProblem& problem);
AllocationResult exhaustive_search(const AllocationProblem& problem);
AllocationResult greedy_search(const AllocationProblem& problem);

// Apply a mask to a system assembled with the all-attackable mask.
ClosedLoopSystem apply_mask(const ClosedLoopSystem& sys, const ProtectionMask& mask);

// Per-sample impacts of the ensemble under a mask (parallel over samples).
std::vector<double> masked_impacts(const AllocationProblem& problem, const ProtectionMask& mask);

// Risk of a mask, re-evaluated with the problem's measure and functional.
double evaluate_mask_risk(const AllocationProblem& problem, const ProtectionMask& mask,
                          std::vector<double>* impacts_out = nullptr);

}  // namespace riskalloc
