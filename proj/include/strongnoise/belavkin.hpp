#pragma once

// General n-level Belavkin (stochastic master) equation
//
//   d rho = -i[H, rho] dt + sum_{k,l} L[M_kl](rho) dt + gamma L[N](rho) dt
//           + sqrt(gamma) D[N](rho) dW
//
// and its weak-coupling (thermal) reduction to a population SDE.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "strongnoise/errors.hpp"
#include "strongnoise/rng.hpp"
#include "strongnoise/twostate.hpp"

namespace strongnoise {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline void require_same_dim(const CMatrix& a, const CMatrix& b, const char* what) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw DimensionMismatch(std::string(what) + ": expected square matrices of equal size, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

/// (A + A^dagger) / 2. The result is Hermitian bit-for-bit.
inline CMatrix hermitize(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    CMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = Complex(a(i, i).real(), 0.0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Complex v = 0.5 * (a(i, j) + std::conj(a(j, i)));
            out(i, j) = v;
            out(j, i) = std::conj(v);
        }
    }
    return out;
}

/// max_ij |A_ij - conj(A_ji)|
inline double hermiticity_defect(const CMatrix& a) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
    return worst;
}

inline double min_eigenvalue(const CMatrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

/// Element of S_n^+: Hermitian, unit trace, positive semidefinite.
class DensityMatrix {
public:
    DensityMatrix() = default;

    /// Validating constructor. Hermiticity is enforced by symmetrizing; trace
    /// and positivity are checked against the given tolerances.
    static DensityMatrix from_matrix(const CMatrix& m, double psd_tol = 1e-9, double trace_tol = 1e-12) {
        if (m.rows() != m.cols() || m.rows() == 0)
            throw DimensionMismatch("density matrix must be square and nonempty");
        DensityMatrix rho(hermitize(m));
        const double tr = rho.trace();
        if (std::abs(tr - 1.0) > trace_tol)
            throw InvalidArgument("density matrix trace is " + std::to_string(tr));
        const double ev = strongnoise::min_eigenvalue(rho.m_);
        if (ev < -psd_tol) throw PsdViolation(ev, 0);
        return rho;
    }

    /// Projector |e_i><e_i| onto a pointer state.
    static DensityMatrix pure(Eigen::Index i, Eigen::Index n) {
        if (i < 0 || i >= n) throw InvalidArgument("pointer index out of range");
        CMatrix m = CMatrix::Zero(n, n);
        m(i, i) = 1.0;
        return DensityMatrix(std::move(m));
    }

    static DensityMatrix maximally_mixed(Eigen::Index n) {
        return DensityMatrix(CMatrix::Identity(n, n) / static_cast<double>(n));
    }

    /// Skips validation; for internal use by steppers that already projected.
    static DensityMatrix unchecked(CMatrix m) { return DensityMatrix(std::move(m)); }

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const CMatrix& matrix() const noexcept { return m_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double trace() const { return m_.trace().real(); }
    double min_eigenvalue() const { return strongnoise::min_eigenvalue(m_); }

    Eigen::VectorXd populations() const { return m_.diagonal().real(); }

private:
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
    CMatrix m_;
};

/// L[O](rho) = O rho O^dag - (rho O^dag O + O^dag O rho) / 2
inline CMatrix lindblad_dissipator(const CMatrix& op, const CMatrix& rho) {
    require_same_dim(op, rho, "lindblad_dissipator");
    const CMatrix od = op.adjoint();
    const CMatrix odo = od * op;
    return op * rho * od - 0.5 * (rho * odo + odo * rho);
}

/// D[O](rho) = O rho + rho O^dag - Tr[(O + O^dag) rho] rho
inline CMatrix innovation(const CMatrix& op, const CMatrix& rho) {
    require_same_dim(op, rho, "innovation");
    const Complex tr = ((op + op.adjoint()) * rho).trace();
    return op * rho + rho * op.adjoint() - tr.real() * rho;
}

inline CMatrix lindblad_dissipator(const CMatrix& op, const DensityMatrix& rho) {
    return lindblad_dissipator(op, rho.matrix());
}
inline CMatrix innovation(const CMatrix& op, const DensityMatrix& rho) {
    return innovation(op, rho.matrix());
}

struct BelavkinModel {
    CMatrix H;               // Hamiltonian
    CMatrix N;               // measurement operator
    std::vector<CMatrix> M;  // M[k * n + l] = M_{k,l}; empty means all zero
    double gamma = 0.0;      // measurement strength

    Eigen::Index dim() const noexcept { return H.rows(); }

    const CMatrix& m(Eigen::Index k, Eigen::Index l) const {
        return M[static_cast<std::size_t>(k * dim() + l)];
    }

    void validate(bool require_normal = false) const {
        require_same_dim(H, N, "BelavkinModel");
        if (!M.empty()) {
            if (M.size() != static_cast<std::size_t>(dim() * dim()))
                throw DimensionMismatch("BelavkinModel: expected n^2 matrices M_{k,l}, got " +
                                        std::to_string(M.size()));
            for (const auto& mk : M) require_same_dim(H, mk, "BelavkinModel M_{k,l}");
        }
        if (hermiticity_defect(H) > 1e-12) throw InvalidArgument("BelavkinModel: H is not Hermitian");
        if (!std::isfinite(gamma) || gamma < 0.0) throw InvalidArgument("BelavkinModel: gamma must be >= 0");
        if (require_normal) {
            const double defect = (N * N.adjoint() - N.adjoint() * N).cwiseAbs().maxCoeff();
            if (defect > 1e-12) throw InvalidArgument("BelavkinModel: N is not normal");
        }
    }
};

/// Weak-coupling model written in the pointer basis: H = sum_i eps_i |i><i|,
/// N = sum_i n_i |i><i|, M_{k,l} = Gamma_{k,l} |k><l|.
struct ThermalModel {
    CMatrix Gamma;
    CVector n_values;
    Eigen::VectorXd epsilon;
    double gamma = 0.0;

    Eigen::Index dim() const noexcept { return Gamma.rows(); }

    void validate() const {
        const Eigen::Index n = Gamma.rows();
        if (n == 0 || Gamma.cols() != n || n_values.size() != n || epsilon.size() != n)
            throw DimensionMismatch("ThermalModel: Gamma, n_values, epsilon sizes disagree");
        if (!std::isfinite(gamma) || gamma < 0.0) throw InvalidArgument("ThermalModel: gamma must be >= 0");
    }

    /// Full matrix form of the same model.
    BelavkinModel to_belavkin() const {
        validate();
        const Eigen::Index n = dim();
        BelavkinModel model;
        model.gamma = gamma;
        model.H = CMatrix::Zero(n, n);
        model.N = CMatrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            model.H(i, i) = epsilon(i);
            model.N(i, i) = n_values(i);
        }
        model.M.reserve(static_cast<std::size_t>(n * n));
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index l = 0; l < n; ++l) {
                CMatrix mk = CMatrix::Zero(n, n);
                mk(k, l) = Gamma(k, l);
                model.M.push_back(std::move(mk));
            }
        return model;
    }
};

struct PopulationVector {
    Eigen::VectorXd q;

    void validate(double tol = 1e-12) const {
        if (q.size() == 0) throw InvalidArgument("PopulationVector: empty");
        if (std::abs(q.sum() - 1.0) > tol)
            throw InvalidArgument("PopulationVector: entries sum to " + std::to_string(q.sum()));
        if (q.minCoeff() < -tol) throw InvalidArgument("PopulationVector: negative entry");
    }
};

struct MatrixStepOptions {
    double psd_tol = 1e-9;
    bool check_psd = true;
};

/// Diagnostics of one matrix step, measured before the post-step projection.
struct MatrixStepReport {
    double trace_before = 1.0;
    double hermiticity_defect_before = 0.0;
    double min_eigenvalue = 0.0;
};

namespace detail {

inline DensityMatrix finish_matrix_step(const CMatrix& raw, const MatrixStepOptions& options,
                                        MatrixStepReport* report) {
    const double tr = raw.trace().real();
    CMatrix next = hermitize(raw);
    next /= tr;
    double ev = 0.0;
    if (options.check_psd || report) ev = min_eigenvalue(next);
    if (report) {
        report->trace_before = tr;
        report->hermiticity_defect_before = hermiticity_defect(raw);
        report->min_eigenvalue = ev;
    }
    if (options.check_psd && ev < -options.psd_tol) throw PsdViolation(ev, 0);
    return DensityMatrix::unchecked(std::move(next));
}

}  // namespace detail

/// Euler-Maruyama step of the full matrix equation with a caller-supplied
/// Brownian increment. The output is re-Hermitized and trace-normalized.
inline DensityMatrix em_step_matrix(const BelavkinModel& model, const DensityMatrix& rho, double dt, double dW,
                                    const MatrixStepOptions& options = {}, MatrixStepReport* report = nullptr) {
    const CMatrix& r = rho.matrix();
    require_same_dim(model.H, r, "em_step_matrix");
    if (dt < 0.0) throw InvalidArgument("em_step_matrix: dt must be >= 0");
    const Complex i_unit(0.0, 1.0);

    CMatrix drift = -i_unit * (model.H * r - r * model.H);
    for (const auto& mk : model.M) {
        if (mk.cwiseAbs().maxCoeff() == 0.0) continue;
        drift += lindblad_dissipator(mk, r);
    }
    drift += model.gamma * lindblad_dissipator(model.N, r);
    const CMatrix noise = std::sqrt(model.gamma) * innovation(model.N, r);

    const CMatrix raw = r + drift * dt + noise * dW;
    return detail::finish_matrix_step(raw, options, report);
}

/// Same step written entry-wise in the pointer basis of a thermal model.
/// Off-diagonal entries that are zero stay exactly zero.
inline DensityMatrix componentwise_step(const ThermalModel& model, const DensityMatrix& rho, double dt, double dW,
                                        const MatrixStepOptions& options = {},
                                        MatrixStepReport* report = nullptr) {
    const CMatrix& r = rho.matrix();
    const Eigen::Index n = model.dim();
    if (r.rows() != n) throw DimensionMismatch("componentwise_step: model and state dimensions differ");
    if (dt < 0.0) throw InvalidArgument("componentwise_step: dt must be >= 0");

    const Complex i_unit(0.0, 1.0);
    const double sg = std::sqrt(model.gamma);
    const Eigen::MatrixXd rates = model.Gamma.cwiseAbs2();  // |Gamma_{k,l}|^2
    const Eigen::VectorXd out_rate = rates.colwise().sum().transpose();  // sum_k |Gamma_{k,i}|^2

    double mean_signal = 0.0;  // sum_a (n_a + conj n_a) q_a
    for (Eigen::Index a = 0; a < n; ++a) mean_signal += 2.0 * model.n_values(a).real() * r(a, a).real();

    CMatrix raw(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double qi = r(i, i).real();
        double gain = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) gain += rates(i, l) * r(l, l).real();
        const double dq = (gain - out_rate(i) * qi) * dt +
                          sg * (2.0 * model.n_values(i).real() - mean_signal) * qi * dW;
        raw(i, i) = qi + dq;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex ni = model.n_values(i);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const Complex rij = r(i, j);
            const Complex nj = model.n_values(j);
            const Complex decay = -i_unit * (model.epsilon(i) - model.epsilon(j)) -
                                  0.5 * (out_rate(i) + out_rate(j)) -
                                  0.5 * model.gamma * (std::norm(ni) + std::norm(nj) - 2.0 * ni * std::conj(nj));
            const Complex signal = ni + std::conj(nj) - mean_signal;
            raw(i, j) = rij + decay * rij * dt + sg * signal * rij * dW;
        }
    }
    return detail::finish_matrix_step(raw, options, report);
}

/// Generator of the pointer-state jump process:
/// G(i,j) = |Gamma_{j,i}|^2 - delta_ij sum_k |Gamma_{k,i}|^2.
inline Eigen::MatrixXd thermal_generator(const CMatrix& Gamma) {
    if (Gamma.rows() != Gamma.cols()) throw DimensionMismatch("thermal_generator: Gamma must be square");
    const Eigen::Index n = Gamma.rows();
    const Eigen::MatrixXd rates = Gamma.cwiseAbs2();
    Eigen::MatrixXd gen(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) gen(i, j) = rates(j, i);
        gen(i, i) -= rates.col(i).sum();
    }
    return gen;
}

/// One step of dq = (G^T q) dt + sqrt(gamma) (2 Re n_i - sum_a 2 Re n_a q_a) q_i dW.
/// Entries are clamped to [0,1] (then renormalized); clamps are counted.
inline PopulationVector population_step(const Eigen::MatrixXd& generator, const CVector& n_values, double gamma,
                                        const PopulationVector& pop, double dt, double dW,
                                        StepStats* stats = nullptr) {
    const Eigen::Index n = pop.q.size();
    if (generator.rows() != n || generator.cols() != n || n_values.size() != n)
        throw DimensionMismatch("population_step: generator, n_values and q sizes disagree");
    const Eigen::VectorXd signal = 2.0 * n_values.real();
    const double mean_signal = signal.dot(pop.q);
    const double sg = std::sqrt(gamma);

    PopulationVector next;
    next.q = pop.q + generator.transpose() * pop.q * dt +
             (sg * dW) * (signal.array() - mean_signal).matrix().cwiseProduct(pop.q);
    bool clamped = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = std::clamp(next.q(i), 0.0, 1.0);
        if (c != next.q(i)) {
            clamped = true;
            next.q(i) = c;
        }
    }
    if (clamped) next.q /= next.q.sum();
    if (stats) {
        ++stats->steps;
        if (clamped) ++stats->clamps;
    }
    return next;
}

struct BelavkinTrajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    double dt = 0.0;                     // effective step actually used
    double max_trace_drift = 0.0;        // max |Tr - 1| before renormalization
    double max_hermiticity_defect = 0.0; // after projection; zero by construction
};

struct BelavkinOptions {
    std::size_t stride = 1;
    std::size_t max_steps = 100'000'000;
    double dt_factor = 0.01;  // dt = min(dt_user, c / gamma)
    bool apply_dt_rule = true;
    MatrixStepOptions step;
    std::uint64_t trajectory = 0;
};

/// Trajectory driver around em_step_matrix. Increments come from the
/// (seed, trajectory) stream.
inline BelavkinTrajectory simulate_belavkin(const BelavkinModel& model, const DensityMatrix& rho0, double dt,
                                            double T, std::uint64_t seed, const BelavkinOptions& options = {}) {
    model.validate();
    require_same_dim(model.H, rho0.matrix(), "simulate_belavkin");
    if (options.stride == 0) throw InvalidArgument("stride must be >= 1");
    const double h = options.apply_dt_rule ? effective_dt(dt, model.gamma, options.dt_factor) : dt;
    const std::size_t n = step_count(T, h);
    if (n > options.max_steps) throw StepBudgetExceeded(n, options.max_steps);

    BelavkinTrajectory traj;
    traj.dt = h;
    traj.times.push_back(0.0);
    traj.states.push_back(rho0);
    BrownianIncrements dW(make_stream(seed, options.trajectory), h);
    DensityMatrix rho = rho0;
    MatrixStepReport report;
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            rho = em_step_matrix(model, rho, h, dW(), options.step, &report);
        } catch (const PsdViolation& e) {
            throw PsdViolation(e.eigenvalue(), k);
        }
        traj.max_trace_drift = std::max(traj.max_trace_drift, std::abs(report.trace_before - 1.0));
        if (k % options.stride == 0) {
            traj.max_hermiticity_defect = std::max(traj.max_hermiticity_defect, hermiticity_defect(rho.matrix()));
            traj.times.push_back(static_cast<double>(k) * h);
            traj.states.push_back(rho);
        }
    }
    return traj;
}

/// The two-level thermal model with N = sigma_z / 2, H = (w/2) sigma_z,
/// M_{1,2} = sqrt(lambda_plus) |1><2|, M_{2,1} = sqrt(lambda_minus) |2><1|.
inline ThermalModel two_state_thermal_model(double lambda_plus, double lambda_minus, double w, double gamma) {
    ThermalModel model;
    model.Gamma = CMatrix::Zero(2, 2);
    model.Gamma(0, 1) = std::sqrt(lambda_plus);
    model.Gamma(1, 0) = std::sqrt(lambda_minus);
    model.n_values = CVector(2);
    model.n_values << 0.5, -0.5;
    model.epsilon = Eigen::VectorXd(2);
    model.epsilon << 0.5 * w, -0.5 * w;
    model.gamma = gamma;
    return model;
}

struct TwoStateReduction {
    TwoStateParams params;  // gamma here is the scalar-model strength, 4 * gamma_phys
    double gamma_phys = 0.0;
    double w = 0.0;
    Complex phase_drift;    // (gamma_phys + lambda_+ + lambda_- + 2 i w) / 2
};

/// Maps the physical two-level model onto the scalar model. The physical
/// equation carries 2 sqrt(gamma) q (1 - q) dW, so the scalar strength is
/// 4 * gamma_phys. The level splitting w is read from epsilon.
inline TwoStateReduction reduce_two_state(const ThermalModel& model) {
    model.validate();
    if (model.dim() != 2) throw DimensionMismatch("reduce_two_state: model must be two-dimensional");
    if (std::abs(model.n_values(0) - 0.5) > 1e-12 || std::abs(model.n_values(1) + 0.5) > 1e-12)
        throw InvalidArgument("reduce_two_state: measurement operator must be sigma_z / 2");
    if (std::abs(model.Gamma(0, 0)) != 0.0 || std::abs(model.Gamma(1, 1)) != 0.0)
        throw InvalidArgument("reduce_two_state: diagonal Gamma entries must vanish");
    const double lp = std::norm(model.Gamma(0, 1));
    const double lm = std::norm(model.Gamma(1, 0));
    if (!(lp + lm > 0.0)) throw InvalidArgument("reduce_two_state: lambda_+ + lambda_- must be > 0");

    TwoStateReduction out;
    out.gamma_phys = model.gamma;
    out.w = model.epsilon(0) - model.epsilon(1);
    out.params.lambda = lp + lm;
    out.params.p = lp / (lp + lm);
    out.params.gamma = 4.0 * model.gamma;
    out.phase_drift = Complex(model.gamma + lp + lm, 2.0 * out.w) / 2.0;
    return out;
}

/// Bloch-ball excess for n = 2: (q - 1/2)^2 + |p|^2 - 1/4 (<= 0 inside).
inline double bloch_excess(const DensityMatrix& rho) {
    if (rho.dim() != 2) throw DimensionMismatch("bloch_excess: expected a 2x2 density matrix");
    const double q = rho(0, 0).real();
    return (q - 0.5) * (q - 0.5) + std::norm(rho(1, 0)) - 0.25;
}

}  // namespace strongnoise
