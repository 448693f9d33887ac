#include "riskalloc/errors.hpp"
#include "riskalloc/lti_model.hpp"

namespace riskalloc {

namespace {

// Four-state process with observer-based state feedback. The printed gains
// are an LQG design (Q = W = I, R = V = 1) for the plant at the box
// midpoint delta = 1.5; the observer propagates that design model, which
// keeps the loop stable over the whole uncertainty box.
PlantEnsemble four_state() {
    ProcessModel p;
    p.A.resize(4, 4);
    p.A << -1, 0, 0, 0,
            1, -5, 0, 0,
            1, 1, -9, 0,
           10, 1, 10, -1;
    p.B = Eigen::MatrixXd::Identity(4, 4);
    p.C.resize(1, 4);
    p.C << 1, 0, 1, 0;
    p.Cj.resize(1, 4);
    p.Cj << 1, 1, 1, 1;
    p.delta_map.a_entries = {{0, 0, 3, 1.0}};

    ObserverFeedback of;
    of.L.resize(4, 4);
    of.L << 5.26, 0.44, 1.64, 1.99,
            0.44, 0.13, 0.14, 0.17,
            1.64, 0.14, 0.61, 0.68,
            1.99, 0.17, 0.68, 0.87;

    DetectorModel d;
    d.K.resize(4, 1);
    d.K << 5.70, 0.70, 0.55, 15.28;
    d.eps_r = 1.0;
    Eigen::MatrixXd Aobs = p.A;
    Aobs(0, 3) += 1.5;
    d.observer_model = Aobs;

    UncertaintySpec u;
    u.lower = Eigen::VectorXd::Constant(1, 0.0);
    u.upper = Eigen::VectorXd::Constant(1, 3.0);

    PlantEnsemble e;
    e.model = StructuredPlant{p, of, d};
    e.uncertainty = u;
    e.name = "paper-example-4state";
    return e;
}

// Six single-integrator agents over an uncertain undirected graph; the
// closed-loop matrix is given directly and every agent's actuator is an
// attack channel.
PlantEnsemble robot() {
    DirectClosedLoop dcl;
    dcl.A.resize(6, 6);
    dcl.A << -32, 4, 0, 3, 0, 5,
               4, -37, 3, 4, 4, 0,
               0, 3, -29, 2, 0, 0,
               3, 4, 2, -33, 3, 0,
               0, 4, 0, 3, -28, 1,
               5, 0, 0, 0, 1, -24;
    dcl.delta_entries = {{0, 0, 0, 1.0}, {0, 0, 5, 1.0}, {0, 5, 0, 1.0}, {0, 5, 5, 1.0}};
    dcl.B = Eigen::MatrixXd::Identity(6, 6);
    dcl.Cp = Eigen::MatrixXd::Zero(1, 6);
    dcl.Cp(0, 2) = 1.0;
    dcl.Cr = Eigen::MatrixXd::Zero(1, 6);
    dcl.Cr(0, 5) = 1.0;

    UncertaintySpec u;
    u.lower = Eigen::VectorXd::Constant(1, -1.0);
    u.upper = Eigen::VectorXd::Constant(1, 0.0);

    PlantEnsemble e;
    e.model = dcl;
    e.uncertainty = u;
    e.name = "paper-robot-6agent";
    return e;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"paper-example-4state", "paper-robot-6agent"};
}

PlantEnsemble make_preset(const std::string& name) {
    if (name == "paper-example-4state") return four_state();
    if (name == "paper-robot-6agent") return robot();
    throw ConfigError("unknown preset: " + name);
}

}  // namespace riskalloc
