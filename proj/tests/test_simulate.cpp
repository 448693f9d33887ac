#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "riskalloc/errors.hpp"
#include "riskalloc/simulate.hpp"

#include <cmath>

using namespace riskalloc;

namespace {

ClosedLoopSystem scalar_loop() {
    ClosedLoopSystem sys;
    sys.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    sys.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
    sys.Cp = Eigen::MatrixXd::Constant(1, 1, 1.0);
    sys.Cr = Eigen::MatrixXd::Constant(1, 1, 1.0);
    sys.mask = ProtectionMask::all_attackable(1);
    return sys;
}

}  // namespace

TEST_CASE("zero attack keeps outputs and energies at zero") {
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::zero;
    auto run = simulate(scalar_loop(), attack, {1e-3, 5.0, 1.0, 100});
    CHECK(run.final_performance_energy() == 0.0);
    CHECK(run.final_detection_energy() == 0.0);
    CHECK_FALSE(run.alarm_time.has_value());
}

TEST_CASE("step response energy matches the closed form") {
    // x' = -x + 1: x(t) = 1 - e^{-t}; integral of x^2 over [0,T]
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::step;
    const double T = 20.0;
    SimulateOptions opts{1e-3, T, 1e9, 1000};
    auto summary = simulate_energies(scalar_loop(), attack, opts);
    const double analytic = T - 2.0 * (1.0 - std::exp(-T)) + 0.5 * (1.0 - std::exp(-2 * T));
    CHECK(summary.performance == doctest::Approx(analytic).epsilon(0.005));
    CHECK(analytic == doctest::Approx(18.5).epsilon(0.001));
}

TEST_CASE("trapezoidal energy of elementary signals") {
    const double dt = 1e-3;
    std::vector<double> ones(1001, 1.0);
    CHECK(energy(ones, dt) == doctest::Approx(1.0).epsilon(1e-3));

    std::vector<double> sine;
    const int n = static_cast<int>(2 * M_PI / dt);
    for (int k = 0; k <= n; ++k) sine.push_back(std::sin(k * dt));
    CHECK(energy(sine, dt) == doctest::Approx(M_PI).epsilon(1e-3));

    CHECK(energy({}, dt) == 0.0);
    CHECK_THROWS_AS(energy(ones, 0.0), ConfigError);
}

TEST_CASE("grid refinement changes energies by less than one percent") {
    auto model = make_preset("paper-example-4state");
    auto sys = model.assemble(ProtectionMask::all_attackable(4),
                              Eigen::VectorXd::Constant(1, 1.1));
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::step;
    auto coarse = simulate_energies(sys, attack, {1e-3, 10.0, 1e9, 1});
    auto fine = simulate_energies(sys, attack, {5e-4, 10.0, 1e9, 1});
    CHECK(std::abs(coarse.performance - fine.performance) <
          0.01 * std::max(1e-12, fine.performance));
    CHECK(std::abs(coarse.detection - fine.detection) <
          0.01 * std::max(1e-12, fine.detection));
}

TEST_CASE("running energies are nondecreasing and alarm triggers at the threshold") {
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::step;
    attack.amplitude = Eigen::VectorXd::Constant(1, 3.0);
    SimulateOptions opts{1e-3, 10.0, 0.5, 10};
    auto run = simulate(scalar_loop(), attack, opts);
    for (std::size_t k = 1; k < run.detection_energy.size(); ++k) {
        CHECK(run.performance_energy[k] >= run.performance_energy[k - 1]);
        CHECK(run.detection_energy[k] >= run.detection_energy[k - 1]);
    }
    REQUIRE(run.alarm_time.has_value());
    CHECK(*run.alarm_time > 0.0);
    CHECK(run.final_detection_energy() > 0.5);
}

TEST_CASE("protecting a channel makes the run invariant to that attack component") {
    auto model = make_preset("paper-robot-6agent");
    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, -0.3);
    auto sys = model.assemble(ProtectionMask::all_attackable(6), delta);

    AttackSignal base;
    base.kind = AttackSignal::Kind::step;
    base.mask = ProtectionMask::from_protected({2}, 6);

    AttackSignal pumped = base;
    pumped.amplitude = Eigen::VectorXd::Ones(6);
    pumped.amplitude[2] = 50.0;  // only the protected channel differs

    SimulateOptions opts{1e-3, 4.0, 1e9, 1};
    auto a = simulate_energies(sys, base, opts);
    auto b = simulate_energies(sys, pumped, opts);
    CHECK(a.performance == doctest::Approx(b.performance).epsilon(1e-12));
    CHECK(a.detection == doctest::Approx(b.detection).epsilon(1e-12));
}

TEST_CASE("custom sampled attack signals are zero-padded") {
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::custom;
    attack.samples = Eigen::MatrixXd::Ones(1, 500);  // half a second at dt=1e-3
    SimulateOptions opts{1e-3, 2.0, 1e9, 1};
    auto run = simulate_energies(scalar_loop(), attack, opts);
    AttackSignal longer = attack;
    longer.samples = Eigen::MatrixXd::Zero(1, 2000);
    longer.samples.leftCols(500).setOnes();
    auto run2 = simulate_energies(scalar_loop(), longer, opts);
    CHECK(run.performance == doctest::Approx(run2.performance).epsilon(1e-12));
}

TEST_CASE("diverging states raise a simulation error") {
    ClosedLoopSystem sys = scalar_loop();
    sys.A = Eigen::MatrixXd::Constant(1, 1, 40.0);  // unstable, fast blowup
    AttackSignal attack;
    attack.kind = AttackSignal::Kind::step;
    CHECK_THROWS_AS(simulate(sys, attack, {1e-2, 200.0, 1e9, 100}), SimulationError);
}
