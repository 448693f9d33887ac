#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Uncertain process / controller / detector models, uncertainty sampling,
// and closed-loop assembly under an actuator protection mask.

namespace riskalloc {

// Additive parametric perturbation: entry (row,col) shifts by
// coeff * delta[param]. Evaluates to (dA, dB); dX(0) = 0 by construction.
struct DeltaEntry {
    int param = 0;
    int row = 0;
    int col = 0;
    double coeff = 1.0;
};

struct DeltaMap {
    std::vector<DeltaEntry> a_entries;
    std::vector<DeltaEntry> b_entries;

    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval(const Eigen::VectorXd& delta, int nx,
                                                     int nu) const;
};

struct ProcessModel {
    Eigen::MatrixXd A;    // n_x x n_x, nominal
    Eigen::MatrixXd B;    // n_x x n_u
    Eigen::MatrixXd C;    // n_m x n_x, measurement
    Eigen::MatrixXd Cj;   // n_p x n_x, performance
    DeltaMap delta_map;

    int nx() const { return static_cast<int>(A.rows()); }
    int nu() const { return static_cast<int>(B.cols()); }
    int nm() const { return static_cast<int>(C.rows()); }
    int np() const { return static_cast<int>(Cj.rows()); }

    void validate() const;
};

struct DynamicController {
    Eigen::MatrixXd Ac, Bc, Cc, Dc;
};

// u = -L x_hat with x_hat the detector observer state.
struct ObserverFeedback {
    Eigen::MatrixXd L;  // n_u x n_x
};

using ControllerModel = std::variant<DynamicController, ObserverFeedback>;

struct DetectorModel {
    Eigen::MatrixXd K;   // observer gain, n_x x n_m
    double eps_r = 1.0;  // detection energy threshold
    // Observer state matrix; defaults to the nominal process A. Presets set
    // this to the model the gains were designed for when that differs from
    // the nominal plant.
    std::optional<Eigen::MatrixXd> observer_model;

    void validate() const;
};

enum class Distribution { uniform };

// Closed box Omega with a seeded sampler.
struct UncertaintySpec {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Distribution distribution = Distribution::uniform;
    std::uint64_t seed = 0;

    int dims() const { return static_cast<int>(lower.size()); }
    void validate() const;
};

// Diagonal of B_a: z_i = 1 attackable, 0 protected; relaxed values in [0,1].
struct ProtectionMask {
    Eigen::VectorXd z;
    int budget = 0;  // n_w

    static ProtectionMask all_attackable(int nu, int budget = 0);
    static ProtectionMask from_protected(const std::vector<int>& protected_set, int nu);

    std::vector<int> protected_set() const;
    bool is_binary(double tol = 1e-9) const;
};

struct ClosedLoopSystem {
    Eigen::MatrixXd A;   // closed-loop state matrix
    Eigen::MatrixXd B;   // attack input matrix (mask applied)
    Eigen::MatrixXd Cp;  // performance output
    Eigen::MatrixXd Cr;  // detection output
    int sample_id = -1;
    Eigen::VectorXd delta;
    ProtectionMask mask;

    int n() const { return static_cast<int>(A.rows()); }
    int nu() const { return static_cast<int>(B.cols()); }
    double spectral_abscissa() const;
};

// Direct closed-loop specification (A_cl given, attack through B_cl columns).
struct DirectClosedLoop {
    Eigen::MatrixXd A;        // nominal A_cl
    std::vector<DeltaEntry> delta_entries;
    Eigen::MatrixXd B;        // unmasked B_cl
    Eigen::MatrixXd Cp, Cr;
};

struct StructuredPlant {
    ProcessModel process;
    ControllerModel controller;
    DetectorModel detector;
};

struct PlantEnsemble {
    std::variant<StructuredPlant, DirectClosedLoop> model;
    UncertaintySpec uncertainty;
    std::string name;

    int nu() const;
    ClosedLoopSystem assemble(const ProtectionMask& mask, const Eigen::VectorXd& delta,
                              int sample_id = -1) const;
};

std::vector<Eigen::VectorXd> sample_uncertainties(const UncertaintySpec& spec, int count);

ClosedLoopSystem assemble_closed_loop(const ProcessModel& p, const ControllerModel& c,
                                      const DetectorModel& d, const ProtectionMask& mask,
                                      const Eigen::VectorXd& delta, int sample_id = -1);

ClosedLoopSystem assemble_direct(const DirectClosedLoop& dcl, const ProtectionMask& mask,
                                 const Eigen::VectorXd& delta, int sample_id = -1);

struct AssumptionReport {
    struct PerSample {
        int sample_id = -1;
        bool stable = false;
        bool controllable = false;
        bool observable_cp = false;
        bool observable_cr = false;
        bool pass() const { return stable && controllable && observable_cp && observable_cr; }
    };
    std::vector<PerSample> samples;
    bool all_pass() const;
};

AssumptionReport check_assumptions(const std::vector<ClosedLoopSystem>& systems);

bool is_hurwitz(const Eigen::MatrixXd& A, double tol = 0.0);
bool is_controllable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
bool is_observable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

// Built-in presets ("paper-example-4state", "paper-robot-6agent").
std::vector<std::string> preset_names();
PlantEnsemble make_preset(const std::string& name);

}  // namespace riskalloc
