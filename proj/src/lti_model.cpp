#include "riskalloc/lti_model.hpp"

#include "riskalloc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>

namespace riskalloc {

namespace {

constexpr double kRankTol = 1e-8;  // relative to the largest singular value

void require(bool cond, const std::string& what) {
    if (!cond) throw ModelError(what);
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> DeltaMap::eval(const Eigen::VectorXd& delta, int nx,
                                                           int nu) const {
    Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(nx, nx);
    Eigen::MatrixXd dB = Eigen::MatrixXd::Zero(nx, nu);
    for (const auto& e : a_entries) dA(e.row, e.col) += e.coeff * delta[e.param];
    for (const auto& e : b_entries) dB(e.row, e.col) += e.coeff * delta[e.param];
    return {dA, dB};
}

void ProcessModel::validate() const {
    require(A.rows() == A.cols(), "process: A must be square");
    require(B.rows() == A.rows(), "process: B row count mismatch");
    require(C.cols() == A.rows(), "process: C column count mismatch");
    require(Cj.cols() == A.rows(), "process: C_j column count mismatch");
    for (const auto& e : delta_map.a_entries)
        require(e.row < nx() && e.col < nx(), "process: delta entry outside A");
    for (const auto& e : delta_map.b_entries)
        require(e.row < nx() && e.col < nu(), "process: delta entry outside B");
}

void DetectorModel::validate() const {
    if (eps_r <= 0.0) throw ConfigError("detector: eps_r must be positive");
}

void UncertaintySpec::validate() const {
    if (lower.size() != upper.size()) throw ConfigError("uncertainty: bound size mismatch");
    for (int i = 0; i < dims(); ++i)
        if (lower[i] > upper[i]) throw ConfigError("uncertainty: lower > upper");
}

ProtectionMask ProtectionMask::all_attackable(int nu, int budget) {
    ProtectionMask m;
    m.z = Eigen::VectorXd::Ones(nu);
    m.budget = budget;
    return m;
}

ProtectionMask ProtectionMask::from_protected(const std::vector<int>& protected_set, int nu) {
    ProtectionMask m;
    m.z = Eigen::VectorXd::Ones(nu);
    for (int i : protected_set) {
        if (i < 0 || i >= nu) throw ModelError("protection mask: index out of range");
        m.z[i] = 0.0;
    }
    m.budget = static_cast<int>(protected_set.size());
    return m;
}

std::vector<int> ProtectionMask::protected_set() const {
    std::vector<int> out;
    for (int i = 0; i < z.size(); ++i)
        if (z[i] < 0.5) out.push_back(i);
    return out;
}

bool ProtectionMask::is_binary(double tol) const {
    for (int i = 0; i < z.size(); ++i)
        if (std::min(std::abs(z[i]), std::abs(z[i] - 1.0)) > tol) return false;
    return true;
}

double ClosedLoopSystem::spectral_abscissa() const {
    return A.eigenvalues().real().maxCoeff();
}

std::vector<Eigen::VectorXd> sample_uncertainties(const UncertaintySpec& spec, int count) {
    spec.validate();
    if (count < 1) throw ConfigError("sample_uncertainties: count must be >= 1");
    std::mt19937_64 rng(spec.seed);
    // Fixed 53-bit mapping keeps the stream identical across platforms.
    auto uniform01 = [&rng] { return (rng() >> 11) * 0x1.0p-53; };
    std::vector<Eigen::VectorXd> samples(count);
    const int d = spec.dims();
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd s(d);
        for (int k = 0; k < d; ++k)
            s[k] = spec.lower[k] + uniform01() * (spec.upper[k] - spec.lower[k]);
        samples[i] = std::move(s);
    }
    return samples;
}

ClosedLoopSystem assemble_closed_loop(const ProcessModel& p, const ControllerModel& c,
                                      const DetectorModel& d, const ProtectionMask& mask,
                                      const Eigen::VectorXd& delta, int sample_id) {
    p.validate();
    d.validate();
    const int nx = p.nx(), nu = p.nu(), nm = p.nm();
    require(mask.z.size() == nu, "assemble: mask length != n_u");
    require(d.K.rows() == nx && d.K.cols() == nm, "assemble: detector gain dimensions");

    Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(nx, nx);
    Eigen::MatrixXd dB = Eigen::MatrixXd::Zero(nx, nu);
    if (delta.size() > 0) std::tie(dA, dB) = p.delta_map.eval(delta, nx, nu);
    const Eigen::MatrixXd Ad = p.A + dA;
    const Eigen::MatrixXd Bd = p.B + dB;
    const Eigen::MatrixXd Aobs = d.observer_model.value_or(p.A);
    require(Aobs.rows() == nx && Aobs.cols() == nx, "assemble: observer model dimensions");
    const Eigen::MatrixXd Ba = mask.z.asDiagonal();

    ClosedLoopSystem sys;
    sys.sample_id = sample_id;
    sys.delta = delta;
    sys.mask = mask;

    if (const auto* of = std::get_if<ObserverFeedback>(&c)) {
        require(of->L.rows() == nu && of->L.cols() == nx, "assemble: L dimensions");
        const int n = 2 * nx;
        sys.A.setZero(n, n);
        sys.A.topLeftCorner(nx, nx) = Ad;
        sys.A.topRightCorner(nx, nx) = -Bd * of->L;
        sys.A.bottomLeftCorner(nx, nx) = d.K * p.C;
        sys.A.bottomRightCorner(nx, nx) = Aobs - p.B * of->L - d.K * p.C;
        sys.B.setZero(n, nu);
        sys.B.topRows(nx) = Bd * Ba;
        sys.Cp.setZero(p.np(), n);
        sys.Cp.leftCols(nx) = p.Cj;
        sys.Cr.setZero(nm, n);
        sys.Cr.leftCols(nx) = p.C;
        sys.Cr.rightCols(nx) = -p.C;
        return sys;
    }

    const auto& dc = std::get<DynamicController>(c);
    const int nz = static_cast<int>(dc.Ac.rows());
    require(dc.Ac.cols() == nz, "assemble: A_c must be square");
    require(dc.Bc.rows() == nz && dc.Bc.cols() == nm, "assemble: B_c dimensions");
    require(dc.Cc.rows() == nu && dc.Cc.cols() == nz, "assemble: C_c dimensions");
    require(dc.Dc.rows() == nu && dc.Dc.cols() == nm, "assemble: D_c dimensions");

    const int n = 2 * nx + nz;
    sys.A.setZero(n, n);
    sys.A.block(0, 0, nx, nx) = Ad + Bd * dc.Dc * p.C;
    sys.A.block(0, nx, nx, nz) = Bd * dc.Cc;
    sys.A.block(nx, 0, nz, nx) = dc.Bc * p.C;
    sys.A.block(nx, nx, nz, nz) = dc.Ac;
    sys.A.block(nx + nz, 0, nx, nx) = (p.B * dc.Dc + d.K) * p.C;
    sys.A.block(nx + nz, nx, nx, nz) = p.B * dc.Cc;
    sys.A.block(nx + nz, nx + nz, nx, nx) = Aobs - d.K * p.C;
    sys.B.setZero(n, nu);
    sys.B.topRows(nx) = Bd * Ba;
    sys.Cp.setZero(p.np(), n);
    sys.Cp.leftCols(nx) = p.Cj;
    sys.Cr.setZero(nm, n);
    sys.Cr.leftCols(nx) = p.C;
    sys.Cr.rightCols(nx) = -p.C;
    return sys;
}

ClosedLoopSystem assemble_direct(const DirectClosedLoop& dcl, const ProtectionMask& mask,
                                 const Eigen::VectorXd& delta, int sample_id) {
    const int n = static_cast<int>(dcl.A.rows());
    require(dcl.A.cols() == n, "direct: A_cl must be square");
    require(dcl.B.rows() == n, "direct: B_cl row count mismatch");
    require(dcl.Cp.cols() == n && dcl.Cr.cols() == n, "direct: output dimensions");
    require(mask.z.size() == dcl.B.cols(), "direct: mask length != n_u");

    ClosedLoopSystem sys;
    sys.A = dcl.A;
    if (delta.size() > 0)
        for (const auto& e : dcl.delta_entries) sys.A(e.row, e.col) += e.coeff * delta[e.param];
    sys.B = dcl.B * mask.z.asDiagonal();
    sys.Cp = dcl.Cp;
    sys.Cr = dcl.Cr;
    sys.sample_id = sample_id;
    sys.delta = delta;
    sys.mask = mask;
    return sys;
}

int PlantEnsemble::nu() const {
    if (const auto* s = std::get_if<StructuredPlant>(&model)) return s->process.nu();
    return static_cast<int>(std::get<DirectClosedLoop>(model).B.cols());
}

ClosedLoopSystem PlantEnsemble::assemble(const ProtectionMask& mask,
                                         const Eigen::VectorXd& delta, int sample_id) const {
    if (const auto* s = std::get_if<StructuredPlant>(&model))
        return assemble_closed_loop(s->process, s->controller, s->detector, mask, delta,
                                    sample_id);
    return assemble_direct(std::get<DirectClosedLoop>(model), mask, delta, sample_id);
}

bool is_hurwitz(const Eigen::MatrixXd& A, double tol) {
    return A.eigenvalues().real().maxCoeff() < -tol;
}

bool is_controllable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    // PBH test: rank [A - lambda I, B] = n at every eigenvalue of A. Better
    // conditioned than the controllability-matrix staircase, whose columns
    // span many orders of magnitude for fast dynamics.
    const int n = static_cast<int>(A.rows());
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXcd M(n, n + B.cols());
        M.leftCols(n) =
            A.cast<std::complex<double>>() -
            es.eigenvalues()[i] * Eigen::MatrixXcd::Identity(n, n);
        M.rightCols(B.cols()) = B.cast<std::complex<double>>();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(M);
        qr.setThreshold(kRankTol);
        if (qr.rank() < n) return false;
    }
    return true;
}

bool is_observable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
    return is_controllable(A.transpose(), C.transpose());
}

bool AssumptionReport::all_pass() const {
    return std::all_of(samples.begin(), samples.end(),
                       [](const PerSample& s) { return s.pass(); });
}

AssumptionReport check_assumptions(const std::vector<ClosedLoopSystem>& systems) {
    AssumptionReport report;
    report.samples.reserve(systems.size());
    for (const auto& sys : systems) {
        AssumptionReport::PerSample s;
        s.sample_id = sys.sample_id;
        s.stable = is_hurwitz(sys.A);
        s.controllable = is_controllable(sys.A, sys.B);
        s.observable_cp = is_observable(sys.A, sys.Cp);
        s.observable_cr = is_observable(sys.A, sys.Cr);
        report.samples.push_back(s);
    }
    return report;
}

}  // namespace riskalloc
