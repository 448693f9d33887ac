#pragma once

#include "riskalloc/lti_model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

// Time-domain simulation of the closed loop under explicit attack signals,
// with running performance and detection energies.

namespace riskalloc {

struct AttackSignal {
    enum class Kind { step, zero, custom };
    Kind kind = Kind::step;
    // Per-channel amplitude; step uses it from t >= 0. Empty means all ones.
    Eigen::VectorXd amplitude;
    // Custom signal sampled on the simulation grid (zero-order hold), one
    // column per step; shorter sequences are zero-padded.
    Eigen::MatrixXd samples;
    // Additional mask applied to the signal (protected channels nulled).
    std::optional<ProtectionMask> mask;

    Eigen::VectorXd value(int step, double dt, int nu) const;
};

struct SimulationRun {
    double dt = 0.0;
    double T = 0.0;
    std::vector<double> time;
    std::vector<Eigen::VectorXd> state;
    std::vector<Eigen::VectorXd> yp;
    std::vector<Eigen::VectorXd> yr;
    std::vector<double> performance_energy;  // running ||y_p||^2
    std::vector<double> detection_energy;    // running ||y_r||^2
    std::optional<double> alarm_time;        // first t with ||y_r||^2 > eps_r

    double final_performance_energy() const { return performance_energy.back(); }
    double final_detection_energy() const { return detection_energy.back(); }
};

struct SimulateOptions {
    double dt = 1e-3;
    double T = 10.0;
    double alarm_threshold = 1.0;  // eps_r
    // Keep every stride-th grid point in the stored trajectories; energies
    // and the alarm time always use the full grid.
    int store_stride = 1;
};

SimulationRun simulate(const ClosedLoopSystem& sys, const AttackSignal& attack,
                       const SimulateOptions& options = {});

struct EnergySummary {
    double performance = 0.0;
    double detection = 0.0;
    std::optional<double> alarm_time;
};

// Streaming variant: final energies only, no trajectory storage.
EnergySummary simulate_energies(const ClosedLoopSystem& sys, const AttackSignal& attack,
                                const SimulateOptions& options = {});

// Trapezoidal l2 energy of a sampled signal on [0, (n-1) dt].
double energy(const std::vector<double>& samples, double dt);

}  // namespace riskalloc
