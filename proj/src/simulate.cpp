#include "riskalloc/simulate.hpp"

#include "riskalloc/errors.hpp"

#include <cmath>

namespace riskalloc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd AttackSignal::value(int step, double dt, int nu) const {
    (void)dt;
    VectorXd a;
    switch (kind) {
        case Kind::zero:
            a = VectorXd::Zero(nu);
            break;
        case Kind::step:
            a = amplitude.size() ? amplitude : VectorXd::Ones(nu);
            break;
        case Kind::custom:
            a = step < samples.cols() ? VectorXd(samples.col(step)) : VectorXd::Zero(nu);
            break;
    }
    if (mask) a = mask->z.asDiagonal() * a;
    return a;
}

namespace {

struct Stepper {
    // Classical fourth-order Runge-Kutta with zero-order-hold input.
    const MatrixXd& A;
    const MatrixXd& B;
    double dt;

    VectorXd advance(const VectorXd& x, const VectorXd& a) const {
        VectorXd k1 = A * x + B * a;
        VectorXd k2 = A * (x + 0.5 * dt * k1) + B * a;
        VectorXd k3 = A * (x + 0.5 * dt * k2) + B * a;
        VectorXd k4 = A * (x + dt * k3) + B * a;
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

template <typename OnSample>
void run_loop(const ClosedLoopSystem& sys, const AttackSignal& attack,
              const SimulateOptions& options, OnSample&& on_sample) {
    if (options.dt <= 0.0 || options.T <= 0.0)
        throw ConfigError("simulate: dt and T must be positive");
    const int steps = static_cast<int>(std::llround(options.T / options.dt));
    Stepper stepper{sys.A, sys.B, options.dt};

    VectorXd x = VectorXd::Zero(sys.n());
    for (int k = 0; k <= steps; ++k) {
        const double t = k * options.dt;
        VectorXd yp = sys.Cp * x;
        VectorXd yr = sys.Cr * x;
        if (!x.allFinite()) throw SimulationError("simulate: state diverged (non-finite)");
        on_sample(k, t, x, yp, yr);
        if (k < steps) x = stepper.advance(x, attack.value(k, options.dt, sys.nu()));
    }
}

}  // namespace

SimulationRun simulate(const ClosedLoopSystem& sys, const AttackSignal& attack,
                       const SimulateOptions& options) {
    SimulationRun run;
    run.dt = options.dt;
    run.T = options.T;

    double ep = 0.0, er = 0.0;
    double prev_p = 0.0, prev_r = 0.0;
    run_loop(sys, attack, options, [&](int k, double t, const VectorXd& x, const VectorXd& yp,
                                       const VectorXd& yr) {
        const double p2 = yp.squaredNorm();
        const double r2 = yr.squaredNorm();
        if (k > 0) {
            ep += 0.5 * options.dt * (prev_p + p2);
            er += 0.5 * options.dt * (prev_r + r2);
        }
        prev_p = p2;
        prev_r = r2;
        if (!run.alarm_time && er > options.alarm_threshold) run.alarm_time = t;
        if (k % options.store_stride == 0) {
            run.time.push_back(t);
            run.state.push_back(x);
            run.yp.push_back(yp);
            run.yr.push_back(yr);
            run.performance_energy.push_back(ep);
            run.detection_energy.push_back(er);
        }
    });
    return run;
}

EnergySummary simulate_energies(const ClosedLoopSystem& sys, const AttackSignal& attack,
                                const SimulateOptions& options) {
    EnergySummary summary;
    double prev_p = 0.0, prev_r = 0.0;
    run_loop(sys, attack, options, [&](int k, double t, const VectorXd&, const VectorXd& yp,
                                       const VectorXd& yr) {
        const double p2 = yp.squaredNorm();
        const double r2 = yr.squaredNorm();
        if (k > 0) {
            summary.performance += 0.5 * options.dt * (prev_p + p2);
            summary.detection += 0.5 * options.dt * (prev_r + r2);
        }
        prev_p = p2;
        prev_r = r2;
        if (!summary.alarm_time && summary.detection > options.alarm_threshold)
            summary.alarm_time = t;
    });
    return summary;
}

double energy(const std::vector<double>& samples, double dt) {
    if (dt <= 0.0) throw ConfigError("energy: dt must be positive");
    if (samples.size() < 2) return 0.0;
    double e = 0.0;
    for (std::size_t k = 1; k < samples.size(); ++k)
        e += 0.5 * dt * (samples[k - 1] * samples[k - 1] + samples[k] * samples[k]);
    return e;
}

}  // namespace riskalloc
